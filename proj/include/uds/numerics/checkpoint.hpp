#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "uds/numerics/parameters.hpp"

namespace uds::num {

// Layout (all integers little-endian):
//   bytes 0..7   magic "UDSCKPT1"
//   bytes 8..15  uint64 header length H
//   next H bytes UTF-8 JSON header:
//                {"format_version": "1.0",
//                 "tensors": {name: {"shape": [...], "offset": k}, ...},
//                 "meta": {...}}
//   remainder    IEEE-754 binary64 values, little-endian; tensor `name`
//                occupies [offset, offset + prod(shape)) counted in doubles.
inline constexpr char kCheckpointMagic[9] = "UDSCKPT1";

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::string& path, const ParameterStore& store, const nlohmann::json& meta);
Checkpoint load_checkpoint(const std::string& path);
// Copies tensors into an existing store; names and shapes must match exactly.
void restore_parameters(const Checkpoint& ckpt, ParameterStore& store);

}  // namespace uds::num
