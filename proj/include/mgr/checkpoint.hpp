#pragma once

#include <map>
#include <string>
#include <vector>

#include "mgr/optim.hpp"

namespace mgr {

// Checkpoint files: magic "MGRC", u32 version, u32 entry count; per entry a
// length-prefixed name, u32 ndim, u32 dims, then f64 little-endian values.
// Values are stored at 64 bits so the round trip is bit-exact in both the
// f32 and f64 builds.
struct CheckpointEntry {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void save_checkpoint(const ParamStore& store, const std::string& path);
std::vector<CheckpointEntry> read_checkpoint(const std::string& path);

// Assigns values to every store parameter whose name starts with `prefix`
// (all parameters when empty). A matching store parameter missing from the
// file is a contract error; extra file entries are ignored.
void load_checkpoint(ParamStore& store, const std::string& path,
                     const std::string& prefix = "");

}  // namespace mgr
