// terracomp: automated-threshold terrace compression for multispectral
// transmission images, with clustering and Dice-based evaluation.
//
// Subcommands cover the end-to-end run and every individual stage so that a
// pipeline can be replayed step by step from persisted intermediates.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "terracomp/config.hpp"
#include "terracomp/pipeline.hpp"

namespace fs = std::filesystem;
using namespace terracomp;

namespace {

struct CommonOverrides {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string method, window_set, out_dir;
  int k = 0;
};

PipelineConfig resolve_config(const CommonOverrides& ov) {
  PipelineConfig cfg = ov.config_path.empty()
                           ? default_pipeline_config()
                           : load_pipeline_config(ov.config_path);
  if (ov.seed_set) cfg.seed = ov.seed;
  if (!ov.method.empty()) cfg.clustering.method = ov.method;
  if (ov.k > 0) cfg.clustering.k = ov.k;
  if (!ov.window_set.empty()) cfg.clustering.window_set = ov.window_set;
  if (!ov.out_dir.empty()) cfg.output_dir = ov.out_dir;
  return cfg;
}

std::string selection_row(int wavelength_nm, std::uint64_t pre_min,
                          std::uint64_t pre_max, std::uint64_t input_area,
                          const ThresholdSelection& sel) {
  ThresholdRow row;
  row.wavelength_nm = wavelength_nm;
  row.pre_min = pre_min;
  row.pre_max = pre_max;
  row.input_area = input_area;
  row.selection = sel;
  return thresholds_csv({row});
}

int cmd_run(const CommonOverrides& ov) {
  PipelineConfig cfg = resolve_config(ov);
  const auto result = run_pipeline(cfg);
  std::cout << "pipeline complete: " << result.out_dir.string() << "\n";
  if (!result.dice.per_body.empty()) {
    std::cout << "method " << result.dice.method << ": overall dice "
              << csv_real(result.dice.overall_average) << ", subset dice "
              << csv_real(result.dice.subset_average) << "\n";
  }
  return 0;
}

int cmd_generate_phantom(const CommonOverrides& ov, const std::string& out_dir,
                         bool no_frames) {
  PipelineConfig cfg = resolve_config(ov);
  if (!cfg.use_phantom)
    throw std::invalid_argument("generate-phantom: config has no phantom section");
  cfg.phantom.validate();
  fs::create_directories(out_dir);
  write_pgm(id_map_from_template(phantom_truth(cfg.phantom)),
            (fs::path(out_dir) / "truth.pgm").string());
  for (std::size_t li = 0; li < cfg.phantom.wavelengths_nm.size(); ++li) {
    const int nm = cfg.phantom.wavelengths_nm[li];
    if (no_frames) continue;
    const fs::path dir = fs::path(out_dir) / "frames" / (std::to_string(nm) + "nm");
    fs::create_directories(dir);
    int index = 0;
    phantom_for_each_frame(cfg.phantom, li, [&](const Raster& frame) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04d.pgm", index++);
      write_pgm(frame, (dir / name).string());
    });
    std::cout << "wavelength " << nm << "nm: " << index << " frames\n";
  }
  std::cout << "phantom written to " << out_dir << "\n";
  return 0;
}

int cmd_accumulate(const std::string& input_dir, const std::string& output) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(input_dir))
    if (entry.path().extension() == ".pgm") files.push_back(entry.path());
  if (files.empty())
    throw std::invalid_argument("accumulate: no .pgm frames in " + input_dir);
  std::sort(files.begin(), files.end());
  FrameStack stack;
  stack.frames.reserve(files.size());
  for (const auto& f : files) stack.frames.push_back(read_raster(f.string()));
  const Raster acc = accumulate_frames(stack);
  write_raster(acc, output);
  std::cout << "accumulated " << files.size() << " frames -> " << output << "\n";
  return 0;
}

int cmd_filter(const std::string& input, const std::string& output, int window) {
  const Raster img = read_raster(input);
  write_raster(median_filter(img, window), output);
  std::cout << "median filtered (window " << window << ") -> " << output << "\n";
  return 0;
}

int cmd_compress(const CommonOverrides& ov, const std::string& input,
                 const std::string& output, std::uint64_t min_body_area,
                 int wavelength_nm, const std::string& report_path) {
  PipelineConfig cfg = resolve_config(ov);
  if (min_body_area == 0) {
    if (!cfg.min_body_area.count(wavelength_nm))
      throw std::invalid_argument(
          "compress: no --min-body-area and no config entry for wavelength " +
          std::to_string(wavelength_nm));
    min_body_area = cfg.min_body_area.at(wavelength_nm);
  }
  const Raster img = read_raster(input);
  const auto [mn, mx] = value_range(img);
  const auto res = auto_compress(img, min_body_area, cfg.terrace);
  write_raster(res.image, output);
  const std::string row =
      selection_row(wavelength_nm, mn, mx, min_body_area, res.selection);
  std::cout << row;
  if (!report_path.empty()) write_text_file(report_path, row);
  return 0;
}

int cmd_window(const CommonOverrides& ov, const std::string& input,
               const std::string& output, int wavelength_nm, long long low,
               long long high, long long out_max) {
  PipelineConfig cfg = resolve_config(ov);
  WindowSpec spec;
  if (low >= 0 && high >= 0) {
    spec.low = static_cast<std::uint32_t>(low);
    spec.high = static_cast<std::uint32_t>(high);
    spec.out_max = static_cast<std::uint32_t>(out_max);
  } else {
    const auto& set =
        cfg.clustering.window_set == "window1" ? cfg.window1 : cfg.window2;
    if (!set.count(wavelength_nm))
      throw std::invalid_argument("window: no preset for wavelength " +
                                  std::to_string(wavelength_nm) + " in " +
                                  cfg.clustering.window_set);
    spec = set.at(wavelength_nm);
  }
  const Raster img = read_raster(input);
  write_raster(window_transform(img, spec), output);
  std::cout << "window [" << spec.low << ", " << spec.high << "] -> " << output
            << "\n";
  return 0;
}

int cmd_cluster(const CommonOverrides& ov, const std::vector<std::string>& inputs,
                const std::string& output, const std::string& model_path) {
  PipelineConfig cfg = resolve_config(ov);
  MultiChannelImage stack;
  int nm = 0;
  for (const auto& path : inputs)
    stack.channels.push_back({++nm, read_raster(path)});  // synthetic order
  FeatureMatrix features = stack_channels(stack);
  if (cfg.clustering.standardize) standardize(features);
  const auto clusters = run_clustering(features, cfg.clustering, cfg.seed);
  const Raster labels =
      make_label_image(clusters.labels, stack.channels[0].image.width,
                       stack.channels[0].image.height, clusters.cluster_count);
  write_raster(labels, output);
  if (!model_path.empty()) write_text_file(model_path, clusters.model_csv);
  std::cout << cfg.clustering.method << ": " << clusters.cluster_count
            << " clusters -> " << output << "\n";
  return 0;
}

int cmd_evaluate(const CommonOverrides& ov, const std::string& labels_path,
                 const std::string& truth_path, const std::string& output,
                 const std::string& method_name) {
  PipelineConfig cfg = resolve_config(ov);
  const Raster labels = read_raster(labels_path);
  const BodyTemplate truth = template_from_id_map(read_raster(truth_path));
  EvaluateOptions opts;
  opts.roi_pad = cfg.evaluation.roi_pad;
  opts.subset_ids = cfg.evaluation.subset_ids;
  opts.method_name = method_name;
  const DiceReport report = evaluate(labels, truth, opts);
  const std::string csv = dice_csv({report});
  std::cout << csv;
  if (!output.empty()) write_text_file(output, csv);
  return 0;
}

int cmd_export_surface(const std::string& input, const std::string& output) {
  export_surface(read_raster(input), output);
  std::cout << "surface grid -> " << output << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terrace-compression pipeline for multispectral transmission images"};
  app.require_subcommand(1);

  CommonOverrides ov;
  std::string input, output, truth_path, report_path, model_path, method_name = "method";
  std::vector<std::string> inputs;
  std::string phantom_out = "phantom";
  bool no_frames = false;
  int median_window = 5;
  std::uint64_t min_body_area = 0;
  int wavelength_nm = 0;
  long long win_low = -1, win_high = -1, win_out_max = 255;

  auto add_overrides = [&](CLI::App* cmd, bool clustering_flags) {
    cmd->add_option("--config", ov.config_path, "pipeline configuration file (JSON)");
    cmd->add_option("--seed", ov.seed, "master seed override")
        ->each([&](const std::string&) { ov.seed_set = true; });
    if (clustering_flags) {
      cmd->add_option("--method", ov.method,
                      "clustering method: kmeans|kmeanspp|meanshift|gmm");
      cmd->add_option("--k", ov.k, "cluster count");
      cmd->add_option("--window", ov.window_set, "window preset: window1|window2");
    }
  };

  auto* run = app.add_subcommand("run", "run the full pipeline");
  add_overrides(run, true);
  run->add_option("--out", ov.out_dir, "output directory override");

  auto* gen = app.add_subcommand("generate-phantom",
                                 "write phantom frames and the truth graymap");
  add_overrides(gen, false);
  gen->add_option("--out", phantom_out, "destination directory");
  gen->add_flag("--truth-only", no_frames, "skip the frame dump");

  auto* acc = app.add_subcommand("accumulate", "sum the frames of one wavelength");
  acc->add_option("--input", input, "directory of .pgm frames")->required();
  acc->add_option("--output", output, "accumulated raster path")->required();

  auto* filt = app.add_subcommand("filter", "median-filter a raster");
  filt->add_option("--input", input)->required();
  filt->add_option("--output", output)->required();
  filt->add_option("--median-window", median_window, "odd window size");

  auto* comp = app.add_subcommand(
      "compress", "terrace-compress a raster with automated thresholds");
  add_overrides(comp, false);
  comp->add_option("--input", input)->required();
  comp->add_option("--output", output)->required();
  comp->add_option("--min-body-area", min_body_area,
                   "smallest heterogeneous body to preserve, in pixels");
  comp->add_option("--wavelength", wavelength_nm, "wavelength label for the report");
  comp->add_option("--report", report_path, "write the threshold CSV row here");

  auto* win = app.add_subcommand("window", "apply a gray window transform");
  add_overrides(win, true);
  win->add_option("--input", input)->required();
  win->add_option("--output", output)->required();
  win->add_option("--wavelength", wavelength_nm, "wavelength for config presets");
  win->add_option("--low", win_low, "window lower edge (with --high)");
  win->add_option("--high", win_high, "window upper edge (with --low)");
  win->add_option("--out-max", win_out_max, "output ceiling");

  auto* clus = app.add_subcommand("cluster",
                                  "cluster stacked per-wavelength rasters");
  add_overrides(clus, true);
  clus->add_option("--input", inputs, "per-wavelength rasters, in wavelength order")
      ->required()
      ->expected(-1);
  clus->add_option("--output", output, "label image path")->required();
  clus->add_option("--model-csv", model_path, "write model parameters here");

  auto* eval = app.add_subcommand("evaluate",
                                  "Dice-score a label image against a truth graymap");
  add_overrides(eval, false);
  eval->add_option("--labels", input)->required();
  eval->add_option("--truth", truth_path)->required();
  eval->add_option("--output", output, "write the Dice CSV here");
  eval->add_option("--method-name", method_name, "column label in the CSV");

  auto* surf = app.add_subcommand("export-surface",
                                  "dump x y gray triples for surface plotting");
  surf->add_option("--input", input)->required();
  surf->add_option("--output", output)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(ov);
    if (gen->parsed()) return cmd_generate_phantom(ov, phantom_out, no_frames);
    if (acc->parsed()) return cmd_accumulate(input, output);
    if (filt->parsed()) return cmd_filter(input, output, median_window);
    if (comp->parsed())
      return cmd_compress(ov, input, output, min_body_area, wavelength_nm,
                          report_path);
    if (win->parsed())
      return cmd_window(ov, input, output, wavelength_nm, win_low, win_high,
                        win_out_max);
    if (clus->parsed()) return cmd_cluster(ov, inputs, output, model_path);
    if (eval->parsed())
      return cmd_evaluate(ov, input, truth_path, output, method_name);
    if (surf->parsed()) return cmd_export_surface(input, output);
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
