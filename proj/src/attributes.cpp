#include "uds/attributes.hpp"

#include <algorithm>
#include <array>

namespace uds {
namespace {

const std::array<std::string, AttributeInventory::kNodeCount> kNodeProperties = {
    "factuality-factual",
    "genericity-arg-abstract",
    "genericity-arg-kind",
    "genericity-arg-particular",
    "genericity-pred-dynamic",
    "genericity-pred-hypothetical",
    "genericity-pred-particular",
    "time-dur-centuries",
    "time-dur-days",
    "time-dur-decades",
    "time-dur-forever",
    "time-dur-hours",
    "time-dur-instant",
    "time-dur-minutes",
    "time-dur-months",
    "time-dur-seconds",
    "time-dur-weeks",
    "time-dur-years",
    "supersense-noun.Tops",
    "supersense-noun.act",
    "supersense-noun.animal",
    "supersense-noun.artifact",
    "supersense-noun.attribute",
    "supersense-noun.body",
    "supersense-noun.cognition",
    "supersense-noun.communication",
    "supersense-noun.event",
    "supersense-noun.feeling",
    "supersense-noun.food",
    "supersense-noun.group",
    "supersense-noun.location",
    "supersense-noun.motive",
    "supersense-noun.object",
    "supersense-noun.person",
    "supersense-noun.phenomenon",
    "supersense-noun.plant",
    "supersense-noun.possession",
    "supersense-noun.process",
    "supersense-noun.quantity",
    "supersense-noun.relation",
    "supersense-noun.shape",
    "supersense-noun.state",
    "supersense-noun.substance",
    "supersense-noun.time",
};

const std::array<std::string, AttributeInventory::kEdgeCount> kEdgeProperties = {
    "awareness",
    "change-of-location",
    "change-of-possession",
    "change-of-state",
    "change-of-state-continuous",
    "existed-after",
    "existed-before",
    "existed-during",
    "instigation",
    "partitive",
    "sentient",
    "volition",
    "was-for-benefit",
    "was-used",
};

template <std::size_t N>
std::optional<std::size_t> find_index(const std::array<std::string, N>& names, std::string_view name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::span<const std::string> AttributeInventory::node_properties() { return kNodeProperties; }
std::span<const std::string> AttributeInventory::edge_properties() { return kEdgeProperties; }

std::optional<std::size_t> AttributeInventory::node_index(std::string_view name) {
  return find_index(kNodeProperties, name);
}

std::optional<std::size_t> AttributeInventory::edge_index(std::string_view name) {
  return find_index(kEdgeProperties, name);
}

PropertyGroup AttributeInventory::node_group(std::size_t index) {
  if (index == 0) return PropertyGroup::kFactuality;
  if (index <= 6) return PropertyGroup::kGenericity;
  if (index <= 17) return PropertyGroup::kTime;
  return PropertyGroup::kWordsense;
}

bool AttributeInventory::applies_to_predicate(std::size_t index) {
  if (index == 0) return true;
  if (index >= 1 && index <= 3) return false;
  if (index <= 17) return true;
  return false;
}

}  // namespace uds
