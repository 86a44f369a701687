#include "hiermatch/bench.hpp"

#include "hiermatch/errors.hpp"
#include "hiermatch/template.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

namespace hiermatch {

void BenchConfig::validate() const {
  if (n_points < 1) throw ConfigError("benchmark needs at least one point");
  if (!(tolerance > 0.0)) throw ConfigError("tolerance must be positive");
  if (eval_modes.empty()) throw ConfigError("benchmark needs at least one evaluation mode");
  stack.validate();
  for (int T : eval_modes) {
    SearchConfig sc = search;
    sc.eval_elements = T;
    sc.validate(stack);
  }
  for (const auto& t : transforms) t.spec.validate();
}

BenchResult run_benchmark(const Image& reference, const BenchConfig& cfg) {
  cfg.validate();
  const std::vector<Point> points =
      sample_training_points(reference.width(), reference.height(), cfg.stack, cfg.n_points, cfg.seed);
  const Template tmpl = train(ResponsePyramid(reference, cfg.stack), points, "benchmark-reference");

  BenchResult result;
  for (const NamedTransform& nt : cfg.transforms) {
    const auto t0 = std::chrono::steady_clock::now();
    const TransformResult transformed = apply_transform(reference, nt.spec);
    const ResponsePyramid query(transformed.image, cfg.stack);
    const double transform_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

    for (int T : cfg.eval_modes) {
      SearchConfig sc = cfg.search;
      sc.eval_elements = T;
      const auto t1 = std::chrono::steady_clock::now();
      const SearchResult found = find(query, tmpl, sc);
      const double find_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t1).count();

      BenchRow row;
      row.transform = nt.name;
      row.eval_T = T;
      row.n_points = cfg.n_points;
      row.wall_ms = find_ms + (T == cfg.eval_modes.front() ? transform_ms : 0.0);
      row.stats = found.stats;
      const auto best = best_per_key_point(found, points.size());
      double err_sum = 0.0;
      int located = 0;
      for (std::size_t k = 0; k < points.size(); ++k) {
        double err = std::numeric_limits<double>::infinity();
        if (best[k] && !best[k]->out_of_bounds) {
          err = distance(best[k]->final_location, map_point(transformed.map, points[k]));
          err_sum += err;
          ++located;
        }
        if (err < cfg.tolerance) ++row.hits;
        row.errors.push_back(err);
      }
      row.rate_pct = 100.0 * row.hits / cfg.n_points;
      row.mean_err_px = located ? err_sum / located : std::numeric_limits<double>::quiet_NaN();
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string report_csv(const BenchResult& r) {
  std::string out = "transform,eval_T,hits,rate_pct,mean_err_px,wall_ms,sim_evals\n";
  char buf[256];
  for (const BenchRow& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.1f,%.3f,%.1f,%llu\n", row.transform.c_str(), row.eval_T,
                  row.hits, row.rate_pct, row.mean_err_px, row.wall_ms,
                  static_cast<unsigned long long>(row.stats.total_similarities()));
    out += buf;
  }
  return out;
}

void emit_report(const BenchResult& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << report_csv(r);
  if (!out) throw IoError("write failed: " + path.string());
}

std::string report_table(const BenchResult& r) {
  // transform -> (T -> row)
  std::vector<std::string> order;
  std::map<std::string, std::map<int, const BenchRow*>> by_name;
  for (const BenchRow& row : r.rows) {
    if (!by_name.count(row.transform)) order.push_back(row.transform);
    by_name[row.transform][row.eval_T] = &row;
  }
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %8s %8s %12s %10s\n", "transform", "rate1 %", "rate2 %", "mean err px",
                "wall ms");
  out += buf;
  for (const std::string& name : order) {
    const auto& rows = by_name[name];
    auto rate = [&](int T) {
      auto it = rows.find(T);
      return it == rows.end() ? std::string("-") : std::to_string(static_cast<int>(std::lround(it->second->rate_pct)));
    };
    const BenchRow* first = rows.begin()->second;
    double wall = 0.0;
    for (const auto& [T, row] : rows) wall += row->wall_ms;
    std::snprintf(buf, sizeof buf, "%-22s %8s %8s %12.2f %10.0f\n", name.c_str(), rate(19).c_str(),
                  rate(1).c_str(), rows.count(19) ? rows.at(19)->mean_err_px : first->mean_err_px, wall);
    out += buf;
  }
  return out;
}

}  // namespace hiermatch
