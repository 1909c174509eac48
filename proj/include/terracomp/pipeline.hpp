#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "terracomp/config.hpp"
#include "terracomp/evaluation.hpp"
#include "terracomp/features.hpp"
#include "terracomp/gmm.hpp"
#include "terracomp/kmeans.hpp"
#include "terracomp/mean_shift.hpp"
#include "terracomp/phantom.hpp"
#include "terracomp/raster_io.hpp"
#include "terracomp/report.hpp"
#include "terracomp/terrace.hpp"
#include "terracomp/window.hpp"

namespace terracomp {

struct PipelineResult {
  std::filesystem::path out_dir;
  std::vector<int> wavelengths;
  std::vector<ThresholdRow> thresholds;  // empty when compression is skipped
  DiceReport dice;
  int cluster_count = 0;  // distinct labels in the label image
};

namespace detail {

class Manifest {
 public:
  Manifest(std::filesystem::path dir, std::vector<std::string> stages)
      : path_(dir / "manifest.json") {
    for (auto& s : stages) status_.emplace_back(std::move(s), "pending");
    write();
  }

  void mark(const std::string& stage, const std::string& state) {
    for (auto& [name, st] : status_)
      if (name == stage) st = state;
    write();
  }

 private:
  void write() const {
    nlohmann::json j;
    bool complete = true;
    for (const auto& [name, st] : status_) {
      j["stages"].push_back({{"name", name}, {"status", st}});
      if (st != "ok" && st != "skipped") complete = false;
    }
    j["complete"] = complete;
    write_text_file(path_.string(), j.dump(2) + "\n");
  }

  std::filesystem::path path_;
  std::vector<std::pair<std::string, std::string>> status_;
};

[[noreturn]] inline void stage_error(const std::string& stage, int wavelength,
                                     const std::exception& e) {
  std::string msg = "stage " + stage;
  if (wavelength > 0) msg += " (wavelength " + std::to_string(wavelength) + "nm)";
  throw std::runtime_error(msg + ": " + e.what());
}

}  // namespace detail

struct ClusterOutput {
  std::vector<int> labels;
  int cluster_count = 0;
  std::string model_csv;
};

/// Label raster with a stable declared ceiling (cluster count - 1, floored
/// at 1 so the graymap container stays valid for single-cluster results).
inline Raster make_label_image(const std::vector<int>& labels, int width,
                               int height, int cluster_count) {
  Raster img = labels_to_image(labels, width, height);
  img.max_value = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(cluster_count - 1));
  return img;
}

/// Runs the configured clustering method over a feature matrix. All methods
/// are seeded from the master seed's "clustering" sub-stream.
inline ClusterOutput run_clustering(const FeatureMatrix& features,
                                    const ClusteringConfig& cc,
                                    std::uint64_t master_seed) {
  const std::uint64_t seed = derive_seed(master_seed, "clustering");
  ClusterOutput out;
  if (cc.method == "kmeans" || cc.method == "kmeanspp") {
    const auto init =
        cc.method == "kmeans" ? KmeansInit::random : KmeansInit::dsquared;
    auto res = kmeans_fit(features, cc.k, init, seed, cc.max_iter, cc.tol);
    out.labels = std::move(res.labels);
    out.cluster_count = cc.k;
    out.model_csv = centroid_model_csv(res.model);
  } else if (cc.method == "gmm") {
    const double cov_reg = cc.cov_reg_scale * mean_feature_variance(features);
    auto res = gmm_fit(features, cc.k, seed, cc.max_iter, cc.tol,
                       cov_reg > 0.0 ? cov_reg : 1e-6);
    out.labels = std::move(res.labels);
    out.cluster_count = cc.k;
    out.model_csv = gmm_model_csv(res.model);
  } else if (cc.method == "meanshift") {
    double bandwidth = cc.mean_shift.bandwidth;
    if (bandwidth <= 0.0)
      bandwidth = estimate_bandwidth(features, cc.mean_shift.quantile, 2000,
                                     derive_seed(master_seed, "bandwidth"));
    const double merge =
        cc.mean_shift.merge_radius > 0.0 ? cc.mean_shift.merge_radius : bandwidth;
    MeanShiftOptions opts;
    opts.max_iter = cc.mean_shift.max_iter;
    opts.tol = cc.mean_shift.tol;
    opts.max_seeds = cc.mean_shift.max_seeds;
    auto res = mean_shift_fit(features, bandwidth, merge, opts);
    out.labels = std::move(res.labels);
    out.cluster_count = static_cast<int>(res.mode_count());
    out.model_csv = modes_csv(res);
  } else {
    throw std::invalid_argument("unknown clustering method " + cc.method);
  }
  return out;
}

/// End-to-end pipeline: source -> filter -> compress -> window -> cluster
/// -> evaluate, with every artifact persisted under the output directory
/// and a manifest tracking per-stage completion.
inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out_dir(cfg.output_dir);
  fs::create_directories(out_dir);

  const bool compressing = cfg.clustering.feature_source == "window";
  detail::Manifest manifest(
      out_dir, {"source", "filter", "compress", "window", "cluster", "evaluate"});
  write_text_file((out_dir / "config.json").string(),
                  pipeline_config_to_json(cfg).dump(2) + "\n");

  PipelineResult result;
  result.out_dir = out_dir;
  result.wavelengths = cfg.wavelengths();
  const auto& wavelengths = result.wavelengths;

  auto raster_name = [&](const std::string& stem, int nm, const char* ext) {
    return (out_dir / (stem + "_" + std::to_string(nm) + "nm" + ext)).string();
  };

  // source: phantom accumulation or user-provided accumulated rasters
  std::vector<Raster> accumulated(wavelengths.size());
  BodyTemplate truth;
  bool have_truth = false;
  try {
    if (cfg.use_phantom) {
      truth = phantom_truth(cfg.phantom);
      have_truth = true;
      write_pgm(id_map_from_template(truth), (out_dir / "truth.pgm").string());
      for (std::size_t li = 0; li < wavelengths.size(); ++li) {
        accumulated[li] = phantom_accumulate(cfg.phantom, li);
        write_raster(accumulated[li],
                     raster_name("accumulated", wavelengths[li], ".r32"));
      }
    } else {
      for (std::size_t li = 0; li < wavelengths.size(); ++li) {
        accumulated[li] = read_raster(cfg.input_accumulated.at(wavelengths[li]));
        write_raster(accumulated[li],
                     raster_name("accumulated", wavelengths[li], ".r32"));
      }
      if (!cfg.input_truth.empty()) {
        truth = template_from_id_map(read_raster(cfg.input_truth));
        have_truth = true;
        write_pgm(id_map_from_template(truth), (out_dir / "truth.pgm").string());
      }
    }
  } catch (const std::exception& e) {
    manifest.mark("source", "failed");
    detail::stage_error("source", 0, e);
  }
  manifest.mark("source", "ok");

  // filter: median smoothing, plus the surface-grid exports
  std::vector<Raster> filtered(wavelengths.size());
  try {
    for (std::size_t li = 0; li < wavelengths.size(); ++li) {
      filtered[li] = median_filter(accumulated[li], cfg.median_window);
      write_raster(filtered[li], raster_name("filtered", wavelengths[li], ".r32"));
      if (cfg.export_surfaces)
        export_surface(filtered[li],
                       raster_name("surface", wavelengths[li], ".txt"));
    }
  } catch (const std::exception& e) {
    manifest.mark("filter", "failed");
    detail::stage_error("filter", 0, e);
  }
  manifest.mark("filter", "ok");

  // compress: automated threshold selection per wavelength
  std::vector<Raster> compressed(wavelengths.size());
  if (compressing) {
    for (std::size_t li = 0; li < wavelengths.size(); ++li) {
      const int nm = wavelengths[li];
      try {
        const auto [mn, mx] = value_range(filtered[li]);
        auto res = auto_compress(filtered[li], cfg.min_body_area.at(nm),
                                 cfg.terrace);
        compressed[li] = std::move(res.image);
        write_raster(compressed[li], raster_name("compressed", nm, ".pgm"));
        ThresholdRow row;
        row.wavelength_nm = nm;
        row.pre_min = mn;
        row.pre_max = mx;
        row.input_area = cfg.min_body_area.at(nm);
        row.selection = res.selection;
        result.thresholds.push_back(row);
      } catch (const std::exception& e) {
        manifest.mark("compress", "failed");
        detail::stage_error("compress", nm, e);
      }
    }
    write_text_file((out_dir / "thresholds.csv").string(),
                    thresholds_csv(result.thresholds));
    manifest.mark("compress", "ok");
  } else {
    manifest.mark("compress", "skipped");
  }

  // window: the selected preset per wavelength, plus the Table-3-shaped echo
  std::vector<Raster> windowed(wavelengths.size());
  if (compressing) {
    const auto& set =
        cfg.clustering.window_set == "window1" ? cfg.window1 : cfg.window2;
    std::vector<WindowRow> window_rows;
    for (std::size_t li = 0; li < wavelengths.size(); ++li) {
      const int nm = wavelengths[li];
      try {
        windowed[li] = window_transform(compressed[li], set.at(nm));
        write_raster(windowed[li],
                     raster_name("windowed_" + cfg.clustering.window_set, nm,
                                 ".pgm"));
        WindowRow row;
        row.wavelength_nm = nm;
        row.compressed_max_level = result.thresholds[li].selection.compressed_max_level;
        row.window_one = cfg.window1.count(nm) ? cfg.window1.at(nm) : WindowSpec{};
        row.window_two = cfg.window2.count(nm) ? cfg.window2.at(nm) : WindowSpec{};
        window_rows.push_back(row);
      } catch (const std::exception& e) {
        manifest.mark("window", "failed");
        detail::stage_error("window", nm, e);
      }
    }
    write_text_file((out_dir / "windows.csv").string(), windows_csv(window_rows));
    manifest.mark("window", "ok");
  } else {
    manifest.mark("window", "skipped");
  }

  // cluster: stack the per-wavelength channels and fit the chosen method
  Raster label_image;
  try {
    MultiChannelImage stack;
    for (std::size_t li = 0; li < wavelengths.size(); ++li)
      stack.channels.push_back(
          {wavelengths[li], compressing ? windowed[li] : filtered[li]});
    FeatureMatrix features = stack_channels(stack);
    if (cfg.clustering.standardize) standardize(features);
    auto clusters = run_clustering(features, cfg.clustering, cfg.seed);
    result.cluster_count = clusters.cluster_count;
    label_image = make_label_image(clusters.labels, stack.channels[0].image.width,
                                   stack.channels[0].image.height,
                                   clusters.cluster_count);
    write_raster(label_image, (out_dir / "labels.pgm").string());
    write_text_file((out_dir / ("model_" + cfg.clustering.method + ".csv")).string(),
                    clusters.model_csv);
  } catch (const std::exception& e) {
    manifest.mark("cluster", "failed");
    detail::stage_error("cluster", 0, e);
  }
  manifest.mark("cluster", "ok");

  // evaluate: Dice against the truth template
  if (have_truth) {
    try {
      EvaluateOptions opts;
      opts.roi_pad = cfg.evaluation.roi_pad;
      opts.subset_ids = cfg.evaluation.subset_ids;
      opts.method_name = cfg.clustering.method + "_" +
                         (compressing ? cfg.clustering.window_set : "raw");
      Raster reference;
      if (cfg.evaluation.fg_policy == "darkest_mean") {
        opts.policy = ForegroundPolicy::darkest_mean;
        reference = compressing ? windowed[0] : filtered[0];
        opts.reference = &reference;
      }
      result.dice = evaluate(label_image, truth, opts);
      write_text_file((out_dir / "dice.csv").string(), dice_csv({result.dice}));
    } catch (const std::exception& e) {
      manifest.mark("evaluate", "failed");
      detail::stage_error("evaluate", 0, e);
    }
    manifest.mark("evaluate", "ok");
  } else {
    manifest.mark("evaluate", "skipped");
  }

  return result;
}

}  // namespace terracomp
