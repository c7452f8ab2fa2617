#include "pcig/kernels.hpp"

#include <algorithm>
#include <cassert>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pcig::kernels {

double iou_units(const BoxUnits& a, const BoxUnits& b) {
  const std::int64_t ix = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const std::int64_t iy = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (ix <= 0 || iy <= 0) return 0.0;
  const std::int64_t inter = ix * iy;
  const std::int64_t uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

void pairwise_iou_serial(std::span<const BoxUnits> boxes, std::span<double> out) {
  const std::size_t n = boxes.size();
  assert(out.size() >= n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = j > i ? iou_units(boxes[i], boxes[j]) : 0.0;
    }
  }
}

void pairwise_iou_parallel(std::span<const BoxUnits> boxes, std::span<double> out) {
  const auto n = static_cast<std::int64_t>(boxes.size());
  assert(out.size() >= static_cast<std::size_t>(n * n));
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      out[static_cast<std::size_t>(i * n + j)] =
          j > i ? iou_units(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(j)])
                : 0.0;
    }
  }
}

std::vector<OverlapPair> overlapping_pairs_serial(std::span<const BoxUnits> boxes,
                                                  std::span<const std::uint8_t> ignore,
                                                  double threshold) {
  const std::size_t n = boxes.size();
  std::vector<OverlapPair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (!ignore.empty() && ignore[i * n + j]) continue;
      const double v = iou_units(boxes[i], boxes[j]);
      if (v > threshold) pairs.push_back({static_cast<int>(i), static_cast<int>(j), v});
    }
  }
  return pairs;
}

std::vector<OverlapPair> overlapping_pairs_parallel(std::span<const BoxUnits> boxes,
                                                    std::span<const std::uint8_t> ignore,
                                                    double threshold) {
  const auto n = static_cast<std::int64_t>(boxes.size());
  // Per-row buckets keep the output order identical to the serial scan.
  std::vector<std::vector<OverlapPair>> rows(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    for (std::int64_t j = i + 1; j < n; ++j) {
      const auto idx = static_cast<std::size_t>(i * n + j);
      if (!ignore.empty() && ignore[idx]) continue;
      const double v =
          iou_units(boxes[static_cast<std::size_t>(i)], boxes[static_cast<std::size_t>(j)]);
      if (v > threshold) row.push_back({static_cast<int>(i), static_cast<int>(j), v});
    }
  }
  std::vector<OverlapPair> pairs;
  for (auto& row : rows) pairs.insert(pairs.end(), row.begin(), row.end());
  return pairs;
}

ClassTally tally_serial(std::span<const std::uint8_t> classes, std::span<const std::uint8_t> passed) {
  assert(classes.size() == passed.size());
  ClassTally tally;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto c = classes[k];
    tally.total[c] += 1;
    tally.passed[c] += passed[k] ? 1 : 0;
  }
  return tally;
}

ClassTally tally_parallel(std::span<const std::uint8_t> classes,
                          std::span<const std::uint8_t> passed) {
  assert(classes.size() == passed.size());
  const auto n = static_cast<std::int64_t>(classes.size());
  ClassTally tally;
#pragma omp parallel
  {
    ClassTally local;
#pragma omp for schedule(static) nowait
    for (std::int64_t k = 0; k < n; ++k) {
      const auto c = classes[static_cast<std::size_t>(k)];
      local.total[c] += 1;
      local.passed[c] += passed[static_cast<std::size_t>(k)] ? 1 : 0;
    }
#pragma omp critical(pcig_tally_merge)
    for (int c = 0; c < kClassCount; ++c) {
      tally.total[c] += local.total[c];
      tally.passed[c] += local.passed[c];
    }
  }
  return tally;
}

}  // namespace pcig::kernels
