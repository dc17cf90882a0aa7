#pragma once

// Checkpoint files: one UTF-8 JSON header line terminated by '\n', followed by
// the declared arrays as raw little-endian float64, component-major.

#include "hsflow/field.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace hsflow {

struct CheckpointArray {
  std::string name;
  Field field;
};

struct Checkpoint {
  double t = 0.0;
  Backend backend = Backend::Spectral;
  Lattice lattice;
  bool chart = false;
  std::vector<CheckpointArray> arrays;
  nlohmann::ordered_json extras = nlohmann::ordered_json::object();

  const Field& array(const std::string& name) const;
};

std::string checkpoint_header(const Checkpoint& ck);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
/// Throws FormatError on a malformed header or truncated payload.
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Header only, without loading the payload.
nlohmann::ordered_json read_checkpoint_header(const std::filesystem::path& path);

}  // namespace hsflow
