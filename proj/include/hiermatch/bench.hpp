#pragma once

#include "hiermatch/image.hpp"
#include "hiermatch/matcher.hpp"
#include "hiermatch/topology.hpp"
#include "hiermatch/transform.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hiermatch {

struct BenchConfig {
  int n_points = 100;
  std::uint64_t seed = 7;
  std::vector<NamedTransform> transforms = robustness_transforms(7);
  double tolerance = 8.0;  // pixels
  // eval_elements is taken from eval_modes. The scan starts one layer below
  // the usual M - 1 so that half-size content is still within reach.
  SearchConfig search = [] {
    SearchConfig sc;
    sc.scan_layer = -1;
    return sc;
  }();
  std::vector<int> eval_modes = {19, 1};
  StackConfig stack;

  void validate() const;
};

struct BenchRow {
  std::string transform;
  int eval_T = 19;
  int hits = 0;
  int n_points = 0;
  double rate_pct = 0.0;
  double mean_err_px = 0.0;  // over key points that produced a candidate
  double wall_ms = 0.0;
  SearchStats stats;
  std::vector<double> errors;  // per key point, +inf when no candidate
};

struct BenchResult {
  std::vector<BenchRow> rows;  // transform-major, eval modes in config order
};

// Trains on n_points random points of `reference`, then for every transform
// searches the transformed image and scores each key point's best final
// location against the mapped training location.
BenchResult run_benchmark(const Image& reference, const BenchConfig& cfg);

// Header transform,eval_T,hits,rate_pct,mean_err_px,wall_ms,sim_evals.
std::string report_csv(const BenchResult& r);
void emit_report(const BenchResult& r, const std::filesystem::path& path);

// Aligned plain-text table with rate1 (T=19) and rate2 (T=1) side by side.
std::string report_table(const BenchResult& r);

}  // namespace hiermatch
