#include "uds/numerics/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "uds/error.hpp"

namespace uds::num {
namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& store, const nlohmann::json& meta) {
  nlohmann::json header;
  header["format_version"] = "1.0";
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const Parameter* p : store.all()) {
    header["tensors"][p->name] = {{"shape", p->value.shape()}, {"offset", offset}};
    offset += p->value.size();
  }
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint '" + path + "'");
  out.write(kCheckpointMagic, 8);
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter* p : store.all()) {
    for (double v : p->value.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error(ErrorCode::kIo, "failed writing checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read checkpoint '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0) {
    throw Error(ErrorCode::kParseError, "'" + path + "' is not a checkpoint");
  }
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint64_t hlen = get_u64(raw + 8);
  if (16 + hlen > bytes.size()) throw Error(ErrorCode::kParseError, "truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("checkpoint header: ") + e.what());
  }
  const std::string version = header.value("format_version", "");
  if (version.rfind("1.", 0) != 0) {
    throw Error(ErrorCode::kUnsupportedVersion, "checkpoint format_version '" + version + "'");
  }
  const std::size_t body = 16 + hlen;
  const std::size_t count = (bytes.size() - body) / 8;
  Checkpoint ckpt;
  ckpt.meta = header.value("meta", nlohmann::json::object());
  for (const auto& [name, info] : header.at("tensors").items()) {
    auto shape = info.at("shape").get<std::vector<std::size_t>>();
    const auto offset = info.at("offset").get<std::size_t>();
    Tensor t(shape);
    if (offset + t.size() > count) throw Error(ErrorCode::kParseError, "tensor '" + name + "' out of bounds");
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = std::bit_cast<double>(get_u64(raw + body + 8 * (offset + i)));
    }
    ckpt.tensors.emplace(name, std::move(t));
  }
  return ckpt;
}

void restore_parameters(const Checkpoint& ckpt, ParameterStore& store) {
  for (Parameter* p : store.all()) {
    auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) throw Error(ErrorCode::kParseError, "checkpoint lacks '" + p->name + "'");
    if (!it->second.same_shape(p->value)) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint tensor '" + p->name + "' has shape " +
                                                 shape_string(it->second.shape()));
    }
    p->value = it->second;
  }
  if (ckpt.tensors.size() != store.count()) {
    throw Error(ErrorCode::kParseError, "checkpoint has extra tensors");
  }
}

}  // namespace uds::num
