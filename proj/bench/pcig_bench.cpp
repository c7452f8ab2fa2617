// Serial reference vs OpenMP kernels, plus batch throughput at 1 and N jobs.
// Every parallel result is compared against the serial one before timing counts.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <omp.h>

#include "pcig/kernels.hpp"
#include "pcig/orchestration.hpp"
#include "pcig/pn_resolver.hpp"

namespace k = pcig::kernels;

namespace {

template <class F>
double best_ms(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t).count());
  }
  return best;
}

std::vector<pcig::BoxUnits> random_boxes(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> side(10'000, 300'000);
  std::vector<pcig::BoxUnits> out(n);
  for (auto& b : out) {
    b.w = side(rng);
    b.h = side(rng);
    b.x = std::uniform_int_distribution<std::int64_t>(0, pcig::kUnitsPerCanvas - b.w)(rng);
    b.y = std::uniform_int_distribution<std::int64_t>(0, pcig::kUnitsPerCanvas - b.h)(rng);
  }
  return out;
}

void row(const char* name, std::size_t n, double serial, double parallel, bool same) {
  std::printf("%-18s %9zu %12.3f %12.3f %8.2fx  %s\n", name, n, serial, parallel, serial / parallel,
              same ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int batch_size = argc > 1 ? std::atoi(argv[1]) : 64;
  std::mt19937_64 rng(7);
  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-18s %9s %12s %12s %9s\n", "kernel", "n", "serial ms", "parallel ms", "speedup");
  bool ok = true;

  for (std::size_t n : {64u, 256u, 1024u, 2048u}) {
    const auto boxes = random_boxes(n, rng);
    std::vector<double> a(n * n), b(n * n);
    const double s = best_ms(5, [&] { k::pairwise_iou_serial(boxes, a); });
    const double p = best_ms(5, [&] { k::pairwise_iou_parallel(boxes, b); });
    ok &= a == b;
    row("pairwise_iou", n, s, p, a == b);
  }

  for (std::size_t n : {256u, 2048u}) {
    const auto boxes = random_boxes(n, rng);
    std::vector<k::OverlapPair> a, b;
    const double s = best_ms(5, [&] { a = k::overlapping_pairs_serial(boxes, {}, 0.05); });
    const double p = best_ms(5, [&] { b = k::overlapping_pairs_parallel(boxes, {}, 0.05); });
    ok &= a == b;
    row("overlapping_pairs", n, s, p, a == b);
  }

  for (std::size_t n : {10'000u, 1'000'000u, 20'000'000u}) {
    std::vector<std::uint8_t> classes(n), passed(n);
    for (std::size_t i = 0; i < n; ++i) {
      classes[i] = static_cast<std::uint8_t>(rng() % 4);
      passed[i] = static_cast<std::uint8_t>(rng() & 1);
    }
    k::ClassTally a, b;
    const double s = best_ms(5, [&] { a = k::tally_serial(classes, passed); });
    const double p = best_ms(5, [&] { b = k::tally_parallel(classes, passed); });
    ok &= a == b;
    row("verdict_tally", n, s, p, a == b);
  }

  // Offline mock batch: rule-based analysis, solver layout, schematic render.
  const char* templates[] = {"Six giraffes in a grassy plain with trees in the background.",
                             "A blue basketball jersey with the Golden State Warriors logo and 'Stephen Curry' written on it.",
                             "A cat on a table next to a lamp.", "Three red balloons above a white house."};
  std::vector<pcig::PromptSpec> prompts;
  for (int i = 0; i < batch_size; ++i) {
    prompts.push_back({templates[i % 4], std::nullopt, "b" + std::to_string(i)});
  }
  const auto dir = std::filesystem::temp_directory_path() / "pcig_bench_batch";
  pcig::RunOptions opts;
  opts.mock = true;
  pcig::FixtureImageResolver resolver(std::filesystem::path(PCIG_DATA_DIR) / "pn_images");
  std::vector<pcig::BatchEntry> a, b;
  opts.out_dir = dir / "serial";
  const double s = best_ms(1, [&] { a = pcig::run_batch(prompts, opts, {}, &resolver, 1); });
  opts.out_dir = dir / "parallel";
  const double p = best_ms(1, [&] { b = pcig::run_batch(prompts, opts, {}, &resolver, omp_get_max_threads()); });
  bool same = a.size() == b.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) {
    same = a[i].manifest.has_value() && b[i].manifest.has_value() && a[i].manifest->regions == b[i].manifest->regions;
  }
  ok &= same;
  row("mock_batch", prompts.size(), s, p, same);
  std::filesystem::remove_all(dir);
  return ok ? 0 : 1;
}
