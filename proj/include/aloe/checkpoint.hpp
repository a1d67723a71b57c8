#pragma once

// Binary parameter checkpoints.
//
// Layout: 8-byte magic "ALOECKP1", little-endian uint64 header length, a JSON
// header describing every network (name, widths, activation, parameter
// count) plus free-form metadata, then the raw little-endian doubles of each
// network in header order. Reloading is bit-exact.

#include "aloe/mlp.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace aloe {

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, Mlp>> nets;

  const Mlp& net(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aloe
