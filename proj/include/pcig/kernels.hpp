#pragma once

// Data-parallel inner loops. Every kernel has a serial reference version that
// the tests hold the OpenMP version to bit-for-bit.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "pcig/scene_model.hpp"

namespace pcig::kernels {

// Intersection-over-union of two integer boxes; exact integer areas.
double iou_units(const BoxUnits& a, const BoxUnits& b);

// Fills the n*n row-major matrix `out`; entries with j <= i are zero.
void pairwise_iou_serial(std::span<const BoxUnits> boxes, std::span<double> out);
void pairwise_iou_parallel(std::span<const BoxUnits> boxes, std::span<double> out);

struct OverlapPair {
  int i = 0;
  int j = 0;
  double iou = 0.0;

  bool operator==(const OverlapPair&) const = default;
};

// Pairs (i < j) with IoU strictly above `threshold`, skipping pairs for which
// `ignore[i * n + j]` is set. Ordered by (i, j).
std::vector<OverlapPair> overlapping_pairs_serial(std::span<const BoxUnits> boxes,
                                                  std::span<const std::uint8_t> ignore,
                                                  double threshold);
std::vector<OverlapPair> overlapping_pairs_parallel(std::span<const BoxUnits> boxes,
                                                    std::span<const std::uint8_t> ignore,
                                                    double threshold);

inline constexpr int kClassCount = 4;

struct ClassTally {
  std::array<std::int64_t, kClassCount> passed{};
  std::array<std::int64_t, kClassCount> total{};

  bool operator==(const ClassTally&) const = default;
};

// classes[k] in [0, kClassCount); passed[k] is 1 for a non-hallucinatory verdict.
ClassTally tally_serial(std::span<const std::uint8_t> classes, std::span<const std::uint8_t> passed);
ClassTally tally_parallel(std::span<const std::uint8_t> classes,
                          std::span<const std::uint8_t> passed);

// Below this many boxes the parallel region costs more than it saves.
inline constexpr std::size_t kParallelBoxThreshold = 48;
inline constexpr std::size_t kParallelRecordThreshold = 4096;

}  // namespace pcig::kernels
