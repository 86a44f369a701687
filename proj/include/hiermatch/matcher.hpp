#pragma once

#include "hiermatch/features.hpp"
#include "hiermatch/image.hpp"
#include "hiermatch/point.hpp"
#include "hiermatch/template.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace hiermatch {

struct SearchStats {
  std::uint64_t similarity_evaluations = 0;   // nearest-neighbour comparisons
  std::uint64_t evaluation_similarities = 0;  // factors of the candidate score
  std::uint64_t elements_extracted = 0;
  std::uint64_t subregions_visited = 0;
  std::uint64_t seeds_skipped = 0;

  std::uint64_t total_similarities() const { return similarity_evaluations + evaluation_similarities; }
  SearchStats& operator+=(const SearchStats& o);
  friend bool operator==(const SearchStats&, const SearchStats&) = default;
};

struct SearchConfig {
  int scan_layer = 0;  // > 0 absolute; 0 selects M - 1, -1 selects M - 2, ...
  int subregion = 150;
  double energy_threshold = 0.0;
  int eval_elements = 19;  // T: 19 (whole layer) or 1 (matched pair)
  // 0 keeps the best candidate per key point; a positive value keeps every
  // candidate scoring at least this much.
  double threshold = 0.0;
  // Layers descended per refinement step. 0 jumps from the coarse match
  // straight to the finest layer pair; 2 passes through every second layer.
  int refine_step = 2;
  // Scale-matched layer pairs scored with T = 19, counted upward from the
  // finest refinement pair; 0 uses every pair the stack offers. The score is
  // the mean over pairs, so candidates at different scales stay comparable.
  int eval_layers = 0;
  // Hill-climb candidates on the pixel grid, within half an element spacing,
  // to undo the lattice quantization of the last relocation. Best-only mode
  // polishes each key point's winner; threshold mode polishes everything.
  bool polish = true;

  int resolved_scan_layer(const StackConfig& cfg) const {
    return scan_layer > 0 ? scan_layer : cfg.num_layers - 1 + scan_layer;
  }
  void validate(const StackConfig& cfg) const;
};

struct NeighborMatch {
  int query_element = 0;
  int template_element = 0;
  int template_layer = 1;
  int distance = 0;  // L1 distance of the pair; similarity = exp(-distance)

  double similarity() const;
};

struct CoarseMatch {
  int query_element = 0;     // l
  int template_element = 0;  // l'
  int template_layer = 1;    // m'
  int scan_layer = 1;        // m
  double best_similarity = 0.0;
  int distance = 0;
  double estimated_scale = 1.0;
  Point corrected_location;  // C.L.
  Point matched_center;      // X_l, C.M. in the query image
  bool degenerate = false;   // query layer quantized to all zeros
};

struct MatchCandidate {
  int key_point = 0;
  Point seed;  // I.L.
  CoarseMatch coarse;
  int refine_query_layer = 1;
  int refine_template_layer = 1;
  int refine_query_element = 0;
  int refine_template_element = 0;
  Point final_location;  // F.L.
  double eval_score = 0.0;
  double eval_distance = 0.0;  // -log(eval_score); ranks without underflow
  int eval_T = 19;
  bool degenerate = false;
  bool out_of_bounds = false;
};

struct SearchResult {
  std::vector<MatchCandidate> candidates;
  SearchStats stats;
};

// One seed per subregion cell (the cell center); cells tile the image from
// the top-left corner, the last row/column may be partial. Cells whose mean
// gradient magnitude is below energy_threshold are dropped.
std::vector<Point> preselect_seeds(const Image& img, int subregion, double energy_threshold);

// Best pair over every query element, template element and template layer.
// Ties go to the smaller |m - m'|, then the smaller l', then the smaller l.
NeighborMatch nearest_neighbor(const LayerFeatures& query, int query_layer, const KeyPointTemplate& t,
                               SearchStats* stats = nullptr);

// Same, restricted to one template layer.
NeighborMatch nearest_neighbor_in_layer(const LayerFeatures& query, const LayerFeatures& tmpl,
                                        int template_layer, SearchStats* stats = nullptr);

// Size of the query relative to the template: sqrt(2)^(m - m').
double estimate_scale(int scan_layer, int template_layer);

// Mask position that puts the matched template element onto the matched
// query element: X_l - s * Y_l'.
Point correct_location(Point matched_center, Point template_offset, double scale);

// Layers compared during refinement: the smallest layer on whichever side is
// finer, the other chosen so both cover the same physical extent.
struct RefineLayers {
  int query_layer = 1;
  int template_layer = 1;
};
RefineLayers refine_layers(int scan_layer, int template_layer, int num_layers);

// Candidate score in exact log form: T = 19 sums the distances of element pairs
// (i, i); T = 1 uses the matched pair only.
long evaluation_distance(const LayerFeatures& query, const LayerFeatures& tmpl, int T,
                         int matched_query_element, int matched_template_element);
double evaluate(const LayerFeatures& query, const LayerFeatures& tmpl, int T, int matched_query_element,
                int matched_template_element);

CoarseMatch scan_coarse(const ResponsePyramid& query, const KeyPointTemplate& t, Point seed, int scan_layer,
                        SearchStats& stats);

// Walks down from the coarse pair in steps of cfg.refine_step layers, each
// step re-matching and relocating, then scores the final location.
MatchCandidate refine(const ResponsePyramid& query, const KeyPointTemplate& t, const CoarseMatch& coarse,
                      const SearchConfig& cfg, SearchStats& stats);

// Recomputes eval_distance and eval_score at cand.final_location.
void score_candidate(const ResponsePyramid& query, const KeyPointTemplate& t, MatchCandidate& cand,
                     const SearchConfig& cfg, SearchStats& stats);

// Moves cand.final_location to the nearby pixel-grid position whose finest
// layer pair is closest to the template (steps of 2 px, then 1 px), then
// rescores it.
void polish(const ResponsePyramid& query, const KeyPointTemplate& t, MatchCandidate& cand,
            const SearchConfig& cfg, SearchStats& stats);

// Full search: every key point from every seed, coarse scan then refinement.
// Candidates are grouped by key point and ranked best first.
SearchResult find(const Image& img, const Template& t, const SearchConfig& cfg);
SearchResult find(const ResponsePyramid& query, const Template& t, const SearchConfig& cfg);

// Best candidate per key point (nullopt when every seed was skipped).
std::vector<std::optional<MatchCandidate>> best_per_key_point(const SearchResult& r, std::size_t key_points);

// Reference cost of brute force: score with T = 19 at every
// stride-spaced position for each scale.
struct ExhaustiveCost {
  std::uint64_t positions = 0;
  int scales = 0;
  std::uint64_t similarity_evaluations = 0;
};
ExhaustiveCost exhaustive_scan_cost(int width, int height, int scales, int stride = 1);

struct ExhaustiveResult {
  Point best_location;
  int best_template_layer = 1;
  long best_distance = 0;
  ExhaustiveCost cost;
};

// Runs the brute-force scan with query layer 1 against each listed template
// layer. Intended for small images and for validating exhaustive_scan_cost.
ExhaustiveResult exhaustive_scan(const ResponsePyramid& query, const KeyPointTemplate& t,
                                 std::span<const int> template_layers, int stride = 1);

}  // namespace hiermatch
