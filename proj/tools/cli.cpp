#include "cli.hpp"

#include "hiermatch/bench.hpp"
#include "hiermatch/errors.hpp"
#include "hiermatch/gabor.hpp"
#include "hiermatch/image.hpp"
#include "hiermatch/matcher.hpp"
#include "hiermatch/synthetic.hpp"
#include "hiermatch/template.hpp"
#include "hiermatch/topology.hpp"
#include "hiermatch/transform.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

namespace hiermatch::cli {

namespace {

std::vector<Point> parse_points(const std::string& text) {
  std::vector<Point> pts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto comma = item.find(',');
    if (comma == std::string::npos) throw ConfigError("point '" + item + "' must be x,y");
    try {
      pts.push_back({std::stod(item.substr(0, comma)), std::stod(item.substr(comma + 1))});
    } catch (const std::logic_error&) {
      throw ConfigError("point '" + item + "' must be x,y");
    }
  }
  return pts;
}

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("write failed: " + path);
}

void add_stack_options(CLI::App* cmd, StackConfig& stack) {
  cmd->add_option("--layers", stack.num_layers, "Number of layers M")->capture_default_str();
  cmd->add_option("--sigma", stack.base_sigma, "Gabor scale of layer 1 (pixels)")->capture_default_str();
  cmd->add_option("--orientations", stack.orientations, "Gabor orientations per layer")->capture_default_str();
  cmd->add_option("--element-spacing", stack.element_spacing_factor,
                  "Element center spacing in units of two RF diameters")
      ->capture_default_str();
}

void add_search_options(CLI::App* cmd, SearchConfig& search) {
  cmd->add_option("--subregion", search.subregion, "Pre-selection cell side (pixels)")->capture_default_str();
  cmd->add_option("--scan-layer", search.scan_layer, "Coarse scan layer (0: M-1, -1: M-2, ...)")->capture_default_str();
  cmd->add_option("--refine-step", search.refine_step,
                  "Layers descended per refinement step (0: jump to the finest pair)")
      ->capture_default_str();
  cmd->add_option("--eval-layers", search.eval_layers, "Layer pairs averaged in the T=19 score (0: all)")
      ->capture_default_str();
  cmd->add_flag("!--no-polish", search.polish, "Skip the pixel-grid polish of kept candidates (default: polish)");
}

std::string candidates_csv(const SearchResult& r) {
  std::string out = "key_point,seed_x,seed_y,l,l_prime,m_prime,scale,cl_x,cl_y,fl_x,fl_y,eval,degenerate\n";
  char buf[512];
  for (const MatchCandidate& c : r.candidates) {
    std::snprintf(buf, sizeof buf, "%d,%.3f,%.3f,%d,%d,%d,%.6f,%.3f,%.3f,%.3f,%.3f,%.6g,%d\n", c.key_point,
                  c.seed.x, c.seed.y, c.coarse.query_element + 1, c.coarse.template_element + 1,
                  c.coarse.template_layer, c.coarse.estimated_scale, c.coarse.corrected_location.x,
                  c.coarse.corrected_location.y, c.final_location.x, c.final_location.y, c.eval_score,
                  c.degenerate ? 1 : 0);
    out += buf;
  }
  return out;
}

Image draw_crosses(Image img, const SearchResult& r) {
  for (const MatchCandidate& c : r.candidates) {
    if (c.out_of_bounds) continue;
    const int cx = static_cast<int>(std::lround(c.final_location.x));
    const int cy = static_cast<int>(std::lround(c.final_location.y));
    const int dx[] = {0, -1, 1, 0, 0};
    const int dy[] = {0, 0, 0, -1, 1};
    for (int i = 0; i < 5; ++i) {
      if (img.contains(cx + dx[i], cy + dy[i])) img.at(cx + dx[i], cy + dy[i]) = 1.0;
    }
  }
  return img;
}

std::string geometry_csv(const StackConfig& stack) {
  std::string out = "layer,kind,element,index,x,y,radius\n";
  char buf[256];
  for (int m = 1; m <= stack.num_layers; ++m) {
    const LayerGeometry g = layer_geometry(stack, m);
    for (int l = 0; l < kHexCount; ++l) {
      const Point e = g.element_offsets[l];
      std::snprintf(buf, sizeof buf, "%d,element,%d,%d,%.6f,%.6f,%.6f\n", m, l + 1, l + 1, e.x, e.y,
                    g.element_footprint_radius());
      out += buf;
    }
    for (int l = 0; l < kHexCount; ++l) {
      const HexPattern rfs = absolute_rf_centers(g, {0.0, 0.0}, l);
      for (int j = 0; j < kHexCount; ++j) {
        std::snprintf(buf, sizeof buf, "%d,rf,%d,%d,%.6f,%.6f,%.6f\n", m, l + 1, j + 1, rfs[j].x, rfs[j].y,
                      g.rf_radius);
        out += buf;
      }
    }
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical Gabor feature extraction and coarse-to-fine localization", "hiermatch"};
  app.require_subcommand(1);

  // train
  StackConfig train_stack;
  std::string train_image, train_points, train_out;
  int train_random = 0;
  std::uint64_t train_seed = 1;
  auto* train_cmd = app.add_subcommand("train", "Build a template around key points of a reference image");
  train_cmd->add_option("--image", train_image, "Reference image (PGM/PPM)")->required();
  auto* pts_opt = train_cmd->add_option("--points", train_points, "Key points as x1,y1;x2,y2;...");
  train_cmd->add_option("--random", train_random, "Sample N random trainable points instead")->excludes(pts_opt);
  train_cmd->add_option("--seed", train_seed, "Seed for --random")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Template output path")->required();
  add_stack_options(train_cmd, train_stack);

  // find
  SearchConfig search;
  std::string find_image, find_template, find_out, find_overlay;
  auto* find_cmd = app.add_subcommand("find", "Localize the template's key points in a query image");
  find_cmd->add_option("--image", find_image, "Query image (PGM/PPM)")->required();
  find_cmd->add_option("--template", find_template, "Template file from 'train'")->required();
  add_search_options(find_cmd, search);
  find_cmd->add_option("--eval-elements", search.eval_elements, "Elements in the candidate score (1 or 19)")
      ->capture_default_str();
  find_cmd->add_option("--threshold", search.threshold, "Keep all candidates scoring >= this (0: best only)")
      ->capture_default_str();
  find_cmd->add_option("--energy-threshold", search.energy_threshold, "Drop cells with lower mean gradient")
      ->capture_default_str();
  find_cmd->add_option("--out", find_out, "Candidates CSV (default stdout)");
  find_cmd->add_option("--overlay", find_overlay, "Write the query image with crosses at final locations");

  // bench
  BenchConfig bench;
  std::string bench_image, bench_out, bench_transforms;
  int synth_size = 512;
  std::uint64_t synth_seed = 1;
  auto* bench_cmd = app.add_subcommand("bench", "Run the transformation-robustness benchmark");
  bench_cmd->add_option("--image", bench_image, "Reference image (default: synthetic texture)");
  bench_cmd->add_option("--synth-size", synth_size, "Side of the synthetic reference image")->capture_default_str();
  bench_cmd->add_option("--synth-seed", synth_seed, "Seed of the synthetic reference image")->capture_default_str();
  bench_cmd->add_option("--points", bench.n_points, "Random key points")->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Seed for points and pixel noise")->capture_default_str();
  bench_cmd->add_option("--tolerance", bench.tolerance, "Hit radius (pixels)")->capture_default_str();
  add_search_options(bench_cmd, bench.search);
  bench_cmd->add_option("--transforms", bench_transforms,
                        "Comma-separated transform specs (default: the nine robustness rows A-I)");
  bench_cmd->add_option("--out", bench_out, "CSV report path");
  add_stack_options(bench_cmd, bench.stack);

  // transform
  std::string tr_image, tr_spec, tr_out, tr_map;
  std::uint64_t tr_seed = 0;
  auto* tr_cmd = app.add_subcommand("transform", "Apply a transform and write its coordinate map");
  tr_cmd->add_option("--image", tr_image, "Input image")->required();
  tr_cmd->add_option("--spec", tr_spec, "e.g. scale:0.5, rotate:10, contrast:1.2+noise:0.1")->required();
  tr_cmd->add_option("--seed", tr_seed, "Seed for pixel noise")->capture_default_str();
  tr_cmd->add_option("--out", tr_out, "Output PGM")->required();
  tr_cmd->add_option("--map", tr_map, "CoordMap CSV row a,b,c,d,tx,ty");

  // inspect-geometry
  StackConfig geo_stack;
  std::string geo_out, kernel_out;
  int kernel_layer = 1, kernel_orientation = 0;
  auto* geo_cmd = app.add_subcommand("inspect-geometry", "Emit RF and element offsets of every layer as CSV");
  add_stack_options(geo_cmd, geo_stack);
  geo_cmd->add_option("--out", geo_out, "CSV path (default stdout)");
  geo_cmd->add_option("--kernel-csv", kernel_out, "Also dump one Gabor kernel grid as CSV");
  geo_cmd->add_option("--kernel-layer", kernel_layer, "Layer of the dumped kernel")->capture_default_str();
  geo_cmd->add_option("--kernel-orientation", kernel_orientation, "Orientation index of the dumped kernel")
      ->capture_default_str();

  // synth
  std::string synth_out;
  int synth_cmd_size = 512;
  std::uint64_t synth_cmd_seed = 1;
  auto* synth_cmd = app.add_subcommand("synth", "Write the procedural textured test image");
  synth_cmd->add_option("--size", synth_cmd_size, "Image side (pixels)")->capture_default_str();
  synth_cmd->add_option("--seed", synth_cmd_seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "Output PGM")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "hiermatch: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*train_cmd) {
      train_stack.validate();
      const Image img = load_image(train_image);
      std::vector<Point> pts = train_random > 0
                                   ? sample_training_points(img.width(), img.height(), train_stack, train_random,
                                                            train_seed)
                                   : parse_points(train_points);
      if (pts.empty()) throw ConfigError("give --points or --random N");
      save_template(train(img, pts, train_stack, train_image), train_out);
      out << "trained " << pts.size() << " key points, " << train_stack.num_layers << " layers -> " << train_out
          << '\n';
    } else if (*find_cmd) {
      const Image img = load_image(find_image);
      const Template t = load_template(find_template);
      const SearchResult r = find(img, t, search);
      write_text(find_out, candidates_csv(r), out);
      if (!find_overlay.empty()) save_pgm(draw_crosses(img, r), find_overlay);
      if (!find_out.empty() && find_out != "-") {
        out << r.candidates.size() << " candidates, " << r.stats.total_similarities() << " similarity evaluations\n";
      }
    } else if (*bench_cmd) {
      if (!bench_transforms.empty()) {
        bench.transforms.clear();
        std::stringstream ss(bench_transforms);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) bench.transforms.push_back({item, parse_transform(item, bench.seed)});
        }
      } else {
        bench.transforms = robustness_transforms(bench.seed);
      }
      const Image ref = bench_image.empty() ? make_textured_image(synth_size, synth_size, synth_seed)
                                            : load_image(bench_image);
      const BenchResult r = run_benchmark(ref, bench);
      if (!bench_out.empty()) emit_report(r, bench_out);
      else out << report_csv(r) << '\n';
      out << report_table(r);
    } else if (*tr_cmd) {
      const Image img = load_image(tr_image);
      const TransformResult r = apply_transform(img, parse_transform(tr_spec, tr_seed));
      save_pgm(r.image, tr_out);
      if (!tr_map.empty()) write_text(tr_map, "a,b,c,d,tx,ty\n" + r.map.to_csv_row() + "\n", out);
    } else if (*geo_cmd) {
      geo_stack.validate();
      write_text(geo_out, geometry_csv(geo_stack), out);
      if (!kernel_out.empty()) {
        const LayerGeometry g = layer_geometry(geo_stack, kernel_layer);
        const GaborBank bank = GaborBank::make(g.sigma, geo_stack.orientations, geo_stack.bandwidth_phi);
        if (kernel_orientation < 0 || kernel_orientation >= geo_stack.orientations) {
          throw ConfigError("kernel orientation index out of range");
        }
        write_text(kernel_out, kernel_to_csv(bank.kernels[kernel_orientation]), out);
      }
    } else if (*synth_cmd) {
      save_pgm(make_textured_image(synth_cmd_size, synth_cmd_size, synth_cmd_seed), synth_out);
    }
  } catch (const ConfigError& e) {
    err << "hiermatch: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "hiermatch: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hiermatch::cli
