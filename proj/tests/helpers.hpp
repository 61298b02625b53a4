#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "uds/corpus.hpp"
#include "uds/graph.hpp"

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(UDS_FIXTURES_DIR) + "/" + name; }

inline uds::UDSGraph fig2() { return uds::load_corpus(fixture("fig2.jsonl")).graphs.at(0); }

inline std::vector<uds::UDSGraph> hand_built() { return uds::load_corpus(fixture("hand_built.jsonl")).graphs; }

inline uds::UDSGraph hand(const std::string& id) {
  for (auto& g : hand_built())
    if (g.sentence_id == id) return g;
  throw std::runtime_error("no fixture " + id);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("uds-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

// Small, fast model for unit tests.
inline uds::ModelConfig tiny_model() {
  uds::ModelConfig c;
  c.token_dim = 8;
  c.pos_dim = 4;
  c.char_dim = 4;
  c.char_filters = 4;
  c.hidden = 6;
  c.index_dim = 4;
  c.relation_dim = 4;
  c.max_index = 40;
  c.attention_dim = 6;
  c.z_dim = 8;
  c.arc_dim = 6;
  c.attr_hidden = 8;
  c.edge_dim = 6;
  c.hash_buckets = 8;
  return c;
}

}  // namespace testing
