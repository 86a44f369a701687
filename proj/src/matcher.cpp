#include "hiermatch/matcher.hpp"

#include "hiermatch/errors.hpp"
#include "hiermatch/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <tuple>

namespace hiermatch {

SearchStats& SearchStats::operator+=(const SearchStats& o) {
  similarity_evaluations += o.similarity_evaluations;
  evaluation_similarities += o.evaluation_similarities;
  elements_extracted += o.elements_extracted;
  subregions_visited += o.subregions_visited;
  seeds_skipped += o.seeds_skipped;
  return *this;
}

void SearchConfig::validate(const StackConfig& cfg) const {
  const int m = resolved_scan_layer(cfg);
  if (m < 1 || m > cfg.num_layers) throw ConfigError("scan layer outside the stack");
  if (subregion < 1) throw ConfigError("subregion must be at least one pixel");
  if (eval_elements != 1 && eval_elements != kHexCount) throw ConfigError("eval elements must be 1 or 19");
  if (!(threshold >= 0.0) || threshold > 1.0) throw ConfigError("score threshold must be in [0, 1]");
  if (!(energy_threshold >= 0.0)) throw ConfigError("energy threshold must be >= 0");
  if (refine_step < 0) throw ConfigError("refine step must be >= 0");
  if (eval_layers < 0) throw ConfigError("eval layers must be >= 0");
}

double NeighborMatch::similarity() const { return std::exp(-static_cast<double>(distance)); }

std::vector<Point> preselect_seeds(const Image& img, int subregion, double energy_threshold) {
  if (subregion < 1) throw ConfigError("subregion must be at least one pixel");
  const int w = img.width();
  const int h = img.height();
  auto gradient = [&](int x, int y) {
    const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
    const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
    const double gx = xr > xl ? (img.at(xr, y) - img.at(xl, y)) / (xr - xl) : 0.0;
    const double gy = yd > yu ? (img.at(x, yd) - img.at(x, yu)) / (yd - yu) : 0.0;
    return std::hypot(gx, gy);
  };

  std::vector<Point> seeds;
  for (int y0 = 0; y0 < h; y0 += subregion) {
    const int y1 = std::min(h, y0 + subregion);
    for (int x0 = 0; x0 < w; x0 += subregion) {
      const int x1 = std::min(w, x0 + subregion);
      if (energy_threshold > 0.0) {
        double sum = 0.0;
        for (int y = y0; y < y1; ++y) {
          for (int x = x0; x < x1; ++x) sum += gradient(x, y);
        }
        const double mean = sum / (static_cast<double>(x1 - x0) * (y1 - y0));
        if (mean < energy_threshold) continue;
      }
      seeds.push_back({(x0 + x1 - 1) / 2.0, (y0 + y1 - 1) / 2.0});
    }
  }
  return seeds;
}

namespace {

// Lexicographic preference key; smaller is better.
using PairKey = std::tuple<int, int, int, int, int>;

void scan_layer_pairs(const LayerFeatures& query, int query_layer, const LayerFeatures& tmpl,
                      int template_layer, NeighborMatch& best, PairKey& best_key, SearchStats* stats) {
  for (int lt = 0; lt < kHexCount; ++lt) {
    for (int lq = 0; lq < kHexCount; ++lq) {
      const int d = l1_distance(query[lq], tmpl[lt]);
      const PairKey key{d, std::abs(query_layer - template_layer), lt, lq, template_layer};
      if (key < best_key) {
        best_key = key;
        best = {lq, lt, template_layer, d};
      }
    }
  }
  if (stats) stats->similarity_evaluations += static_cast<std::uint64_t>(kHexCount) * kHexCount;
}

PairKey worst_key() {
  return {std::numeric_limits<int>::max(), 0, 0, 0, 0};
}

}  // namespace

NeighborMatch nearest_neighbor(const LayerFeatures& query, int query_layer, const KeyPointTemplate& t,
                               SearchStats* stats) {
  NeighborMatch best;
  PairKey best_key = worst_key();
  for (int m = 1; m <= t.num_layers(); ++m) {
    scan_layer_pairs(query, query_layer, t.layer(m), m, best, best_key, stats);
  }
  return best;
}

NeighborMatch nearest_neighbor_in_layer(const LayerFeatures& query, const LayerFeatures& tmpl,
                                        int template_layer, SearchStats* stats) {
  NeighborMatch best;
  PairKey best_key = worst_key();
  // The layer-distance term is constant here; pass the template layer twice.
  scan_layer_pairs(query, template_layer, tmpl, template_layer, best, best_key, stats);
  return best;
}

double estimate_scale(int scan_layer, int template_layer) { return sqrt2_pow(scan_layer - template_layer); }

Point correct_location(Point matched_center, Point template_offset, double scale) {
  return matched_center - scale * template_offset;
}

RefineLayers refine_layers(int scan_layer, int template_layer, int num_layers) {
  const int diff = scan_layer - template_layer;
  return {std::clamp(1 + diff, 1, num_layers), std::clamp(1 - diff, 1, num_layers)};
}

long evaluation_distance(const LayerFeatures& query, const LayerFeatures& tmpl, int T,
                         int matched_query_element, int matched_template_element) {
  if (T == 1) return l1_distance(query.at(matched_query_element), tmpl.at(matched_template_element));
  if (T != kHexCount) throw ConfigError("evaluation uses 1 or 19 elements");
  long sum = 0;
  for (int i = 0; i < kHexCount; ++i) sum += l1_distance(query[i], tmpl[i]);
  return sum;
}

double evaluate(const LayerFeatures& query, const LayerFeatures& tmpl, int T, int matched_query_element,
                int matched_template_element) {
  return std::exp(-static_cast<double>(
      evaluation_distance(query, tmpl, T, matched_query_element, matched_template_element)));
}

namespace {

bool layer_all_zero(const LayerFeatures& f) {
  return std::all_of(f.begin(), f.end(), [](const FeatureVector& v) { return v.all_zero(); });
}

// Pulls a location into the region where the element around it lies fully
// inside the image. Returns nullopt when it is more than one footprint away
// from the image.
std::optional<Point> admit(Point p, double footprint, int width, int height) {
  auto axis = [&](double v, int n) -> std::optional<double> {
    if (v < -footprint || v > n - 1 + footprint) return std::nullopt;
    const double lo = footprint;
    const double hi = n - 1 - footprint;
    if (lo > hi) return (n - 1) / 2.0;
    return std::clamp(v, lo, hi);
  };
  const auto x = axis(p.x, width);
  const auto y = axis(p.y, height);
  if (!x || !y) return std::nullopt;
  return Point{*x, *y};
}

}  // namespace

CoarseMatch scan_coarse(const ResponsePyramid& query, const KeyPointTemplate& t, Point seed, int scan_layer,
                        SearchStats& stats) {
  const LayerFeatures q = query.extract(scan_layer, seed);
  stats.elements_extracted += kHexCount;
  const NeighborMatch nn = nearest_neighbor(q, scan_layer, t, &stats);

  CoarseMatch c;
  c.query_element = nn.query_element;
  c.template_element = nn.template_element;
  c.template_layer = nn.template_layer;
  c.scan_layer = scan_layer;
  c.distance = nn.distance;
  c.best_similarity = nn.similarity();
  c.estimated_scale = estimate_scale(scan_layer, nn.template_layer);
  c.matched_center = seed + query.geometry(scan_layer).element_offsets[nn.query_element];
  c.corrected_location = correct_location(
      c.matched_center, t.relative_position(nn.template_layer, nn.template_element), c.estimated_scale);
  c.degenerate = layer_all_zero(q);
  return c;
}

MatchCandidate refine(const ResponsePyramid& query, const KeyPointTemplate& t, const CoarseMatch& coarse,
                      const SearchConfig& cfg, SearchStats& stats) {
  const int M = t.num_layers();
  const RefineLayers finest = refine_layers(coarse.scan_layer, coarse.template_layer, M);

  // Layer pairs visited after the coarse match; every pair keeps the
  // coarse layer offset so both sides stay at matched physical scale.
  std::vector<RefineLayers> steps;
  if (cfg.refine_step > 0) {
    int mq = coarse.scan_layer;
    int mt = coarse.template_layer;
    while (std::min(mq, mt) > 1) {
      const int d = std::min(cfg.refine_step, std::min(mq, mt) - 1);
      mq -= d;
      mt -= d;
      steps.push_back({mq, mt});
    }
  }
  if (steps.empty()) steps.push_back(finest);

  MatchCandidate cand;
  cand.coarse = coarse;
  cand.refine_query_layer = finest.query_layer;
  cand.refine_template_layer = finest.template_layer;
  cand.eval_T = cfg.eval_elements;
  cand.degenerate = coarse.degenerate;

  auto out_of_bounds = [&](Point where) {
    cand.out_of_bounds = true;
    cand.final_location = where;
    cand.eval_distance = std::numeric_limits<double>::infinity();
    cand.eval_score = 0.0;
    return cand;
  };

  const Image& img = query.image();
  Point location = coarse.corrected_location;
  LayerFeatures q;
  NeighborMatch nn;
  for (const RefineLayers& step : steps) {
    const LayerGeometry& g = query.geometry(step.query_layer);
    const auto start = admit(location, g.element_footprint_radius(), img.width(), img.height());
    if (!start) return out_of_bounds(location);
    q = query.extract(step.query_layer, *start);
    stats.elements_extracted += kHexCount;
    nn = nearest_neighbor_in_layer(q, t.layer(step.template_layer), step.template_layer, &stats);
    const Point matched = *start + g.element_offsets[nn.query_element];
    location = correct_location(matched, t.relative_position(step.template_layer, nn.template_element),
                                coarse.estimated_scale);
    cand.degenerate = cand.degenerate || layer_all_zero(q);
  }
  cand.refine_query_element = nn.query_element;
  cand.refine_template_element = nn.template_element;
  cand.final_location = location;

  if (cfg.eval_elements == 1) {
    cand.eval_distance =
        evaluation_distance(q, t.layer(finest.template_layer), 1, nn.query_element, nn.template_element);
    cand.eval_score = std::exp(-cand.eval_distance);
    stats.evaluation_similarities += 1;
    return cand;
  }
  score_candidate(query, t, cand, cfg, stats);
  return cand;
}

void score_candidate(const ResponsePyramid& query, const KeyPointTemplate& t, MatchCandidate& cand,
                     const SearchConfig& cfg, SearchStats& stats) {
  if (cand.out_of_bounds) return;
  if (cfg.eval_elements == 1) {
    // Re-read the matched pair at the current location.
    const LayerFeatures q = query.extract(cand.refine_query_layer, cand.final_location);
    stats.elements_extracted += kHexCount;
    cand.eval_distance = evaluation_distance(q, t.layer(cand.refine_template_layer), 1,
                                             cand.refine_query_element, cand.refine_template_element);
    stats.evaluation_similarities += 1;
    cand.eval_score = std::exp(-cand.eval_distance);
    return;
  }
  // Mean over the scale-matched layer pairs, finest first.
  const int M = t.num_layers();
  double sum = 0.0;
  int pairs = 0;
  for (int j = 0; cfg.eval_layers == 0 || j < cfg.eval_layers; ++j) {
    const int ql = cand.refine_query_layer + j;
    const int tl = cand.refine_template_layer + j;
    if (ql > M || tl > M) break;
    try {
      const LayerFeatures at_final = query.extract(ql, cand.final_location);
      stats.elements_extracted += kHexCount;
      sum += static_cast<double>(evaluation_distance(at_final, t.layer(tl), kHexCount, 0, 0));
    } catch (const CoverageError&) {
      cand.out_of_bounds = true;
      cand.eval_distance = std::numeric_limits<double>::infinity();
      cand.eval_score = 0.0;
      return;
    }
    stats.evaluation_similarities += kHexCount;
    ++pairs;
  }
  cand.eval_distance = sum / pairs;
  cand.eval_score = std::exp(-cand.eval_distance);
}

void polish(const ResponsePyramid& query, const KeyPointTemplate& t, MatchCandidate& cand,
            const SearchConfig& cfg, SearchStats& stats) {
  if (cand.out_of_bounds) return;
  const LayerGeometry& g = query.geometry(cand.refine_query_layer);
  const LayerFeatures& target = t.layer(cand.refine_template_layer);
  const double reach = 0.5 * norm(g.element_offsets[1]);
  const Point origin = cand.final_location;

  auto cost = [&](Point p) -> std::optional<long> {
    try {
      const LayerFeatures q = query.extract(cand.refine_query_layer, p);
      stats.elements_extracted += kHexCount;
      stats.evaluation_similarities += kHexCount;
      return evaluation_distance(q, target, kHexCount, 0, 0);
    } catch (const CoverageError&) {
      return std::nullopt;
    }
  };

  // Walk the pixel grid, starting from the nearest pixel when that one is
  // at least as good as the unrounded location.
  std::optional<long> best_cost = cost(origin);
  if (!best_cost) return;
  Point best = origin;
  const Point snapped{std::round(origin.x), std::round(origin.y)};
  if (!(snapped == origin)) {
    if (const auto c = cost(snapped); c && *c <= *best_cost) {
      best_cost = c;
      best = snapped;
    }
  }
  for (double step : {2.0, 1.0}) {
    bool moved = true;
    while (moved) {
      moved = false;
      const Point here = best;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const Point p = here + Point{dx * step, dy * step};
          if (distance(p, origin) > reach) continue;
          const auto c = cost(p);
          if (c && *c < *best_cost) {
            best_cost = c;
            best = p;
            moved = true;
          }
        }
      }
    }
  }
  cand.final_location = best;
  score_candidate(query, t, cand, cfg, stats);
}

namespace {

bool ranks_before(const MatchCandidate& a, const MatchCandidate& b) {
  return std::tie(a.out_of_bounds, a.degenerate, a.eval_distance) <
         std::tie(b.out_of_bounds, b.degenerate, b.eval_distance);
}

}  // namespace

SearchResult find(const ResponsePyramid& query, const Template& t, const SearchConfig& cfg) {
  const StackConfig& stack = t.stack_config;
  cfg.validate(stack);
  if (!(query.config() == stack)) throw ConfigError("query pyramid and template use different stacks");
  const int scan_layer = cfg.resolved_scan_layer(stack);
  const std::vector<Point> seeds = preselect_seeds(query.image(), cfg.subregion, cfg.energy_threshold);

  const std::size_t n_seeds = seeds.size();
  const std::size_t n_tasks = t.key_points.size() * n_seeds;
  std::vector<std::optional<MatchCandidate>> slots(n_tasks);
  std::vector<SearchStats> task_stats(n_tasks);

  parallel_for(n_tasks, [&](std::size_t task) {
    const std::size_t k = task / n_seeds;
    const Point seed = seeds[task % n_seeds];
    SearchStats& stats = task_stats[task];
    stats.subregions_visited += 1;
    try {
      const CoarseMatch coarse = scan_coarse(query, t.key_points[k], seed, scan_layer, stats);
      MatchCandidate cand = refine(query, t.key_points[k], coarse, cfg, stats);
      // A threshold compares absolute scores, so every candidate is polished
      // before it is judged.
      if (cfg.polish && cfg.threshold > 0.0) polish(query, t.key_points[k], cand, cfg, stats);
      cand.key_point = static_cast<int>(k);
      cand.seed = seed;
      slots[task] = std::move(cand);
    } catch (const CoverageError&) {
      stats.seeds_skipped += 1;
    }
  });

  SearchResult result;

  for (std::size_t k = 0; k < t.key_points.size(); ++k) {
    std::vector<MatchCandidate> ranked;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      if (auto& c = slots[k * n_seeds + s]) ranked.push_back(std::move(*c));
    }
    std::stable_sort(ranked.begin(), ranked.end(), ranks_before);
    if (cfg.threshold <= 0.0) {
      if (!ranked.empty()) result.candidates.push_back(std::move(ranked.front()));
      continue;
    }
    for (auto& c : ranked) {
      if (!c.out_of_bounds && c.eval_score >= cfg.threshold) result.candidates.push_back(std::move(c));
    }
  }

  if (cfg.polish && cfg.threshold <= 0.0) {
    // Best-only mode polishes just the winner of each key point.
    std::vector<SearchStats> polish_stats(result.candidates.size());
    parallel_for(result.candidates.size(), [&](std::size_t i) {
      MatchCandidate& c = result.candidates[i];
      polish(query, t.key_points[static_cast<std::size_t>(c.key_point)], c, cfg, polish_stats[i]);
    });
    for (const auto& s : polish_stats) result.stats += s;
  }
  for (const auto& s : task_stats) result.stats += s;
  return result;
}

SearchResult find(const Image& img, const Template& t, const SearchConfig& cfg) {
  return find(ResponsePyramid(img, t.stack_config), t, cfg);
}

std::vector<std::optional<MatchCandidate>> best_per_key_point(const SearchResult& r, std::size_t key_points) {
  std::vector<std::optional<MatchCandidate>> best(key_points);
  for (const MatchCandidate& c : r.candidates) {
    auto& slot = best.at(static_cast<std::size_t>(c.key_point));
    if (!slot || ranks_before(c, *slot)) slot = c;
  }
  return best;
}

ExhaustiveCost exhaustive_scan_cost(int width, int height, int scales, int stride) {
  if (stride < 1) throw ConfigError("stride must be >= 1");
  ExhaustiveCost cost;
  const auto cols = static_cast<std::uint64_t>((width + stride - 1) / stride);
  const auto rows = static_cast<std::uint64_t>((height + stride - 1) / stride);
  cost.positions = cols * rows;
  cost.scales = scales;
  cost.similarity_evaluations = cost.positions * static_cast<std::uint64_t>(scales) * kHexCount;
  return cost;
}

ExhaustiveResult exhaustive_scan(const ResponsePyramid& query, const KeyPointTemplate& t,
                                 std::span<const int> template_layers, int stride) {
  const Image& img = query.image();
  ExhaustiveResult best;
  best.best_distance = std::numeric_limits<long>::max();
  best.cost.scales = static_cast<int>(template_layers.size());
  for (int y = 0; y < img.height(); y += stride) {
    for (int x = 0; x < img.width(); x += stride) {
      const Point p{static_cast<double>(x), static_cast<double>(y)};
      const LayerFeatures q = query.extract(1, p);
      ++best.cost.positions;
      for (int m : template_layers) {
        const long d = evaluation_distance(q, t.layer(m), kHexCount, 0, 0);
        best.cost.similarity_evaluations += kHexCount;
        if (d < best.best_distance) {
          best.best_distance = d;
          best.best_location = p;
          best.best_template_layer = m;
        }
      }
    }
  }
  return best;
}

}  // namespace hiermatch
