#pragma once

#include <filesystem>

#include "arlb/trainer.hpp"

namespace arlb {

// Checkpoint layout: `manifest.json` (algorithm, configuration, counters and
// an array index) plus one little-endian raw binary blob per named array
// (float64 or int64). Round trips are bit-exact.
void save_checkpoint(const TrainingState& state, const std::filesystem::path& dir);
TrainingState load_checkpoint(const std::filesystem::path& dir);

}  // namespace arlb
