#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace uds {

// Scalar annotation: value on [-3,3] with an annotator confidence on [0,1].
// A confidence of 0 is treated exactly like a missing record.
struct AttributeRecord {
  double value = 0.0;
  double confidence = 0.0;

  bool operator==(const AttributeRecord&) const = default;
};

using AttributeMap = std::map<std::string, AttributeRecord>;

inline constexpr double kMinAttributeValue = -3.0;
inline constexpr double kMaxAttributeValue = 3.0;

enum class PropertyGroup { kFactuality, kGenericity, kTime, kWordsense, kProtoroles };

// The fixed, ordered property inventory. Column j of every attribute vector
// in the model and the analysis code refers to property j here.
class AttributeInventory {
 public:
  static constexpr std::size_t kNodeCount = 44;
  static constexpr std::size_t kEdgeCount = 14;

  static std::span<const std::string> node_properties();
  static std::span<const std::string> edge_properties();

  static std::optional<std::size_t> node_index(std::string_view name);
  static std::optional<std::size_t> edge_index(std::string_view name);

  static PropertyGroup node_group(std::size_t index);

  // Properties that apply to predicates (factuality, pred-genericity, time)
  // versus arguments (arg-genericity, word sense).
  static bool applies_to_predicate(std::size_t node_index);
};

// Records with confidence > 0 are annotations; everything else is absent.
inline bool is_annotated(const AttributeRecord& r) { return r.confidence > 0.0; }

}  // namespace uds
