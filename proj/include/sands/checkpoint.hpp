#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "sands/training.hpp"

namespace sands {

inline constexpr uint32_t kCheckpointVersion = 1;

// Everything needed to continue a run bit-for-bit: both classifiers, their
// optimizer moments, prediction caches, counters, self-training pools and
// the metric history, plus the config that produced them.
struct Checkpoint {
  std::string config_text;
  std::string config_hash;
  uint64_t seed = 0;
  uint64_t split_size = 0;
  double unlabeled_fraction = 1.0;
  TrainState state;
};

// Binary container of named tensors with shape metadata. Doubles are
// stored as raw IEEE bits, so a round trip is exact.
void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);

// File variants. Writing goes through a temporary file and a rename.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

void write_params(std::ostream& out, const ClassifierParams& params);
ClassifierParams read_params(std::istream& in);

}  // namespace sands
