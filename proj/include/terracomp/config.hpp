#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "terracomp/evaluation.hpp"
#include "terracomp/phantom.hpp"
#include "terracomp/terrace.hpp"
#include "terracomp/window.hpp"

namespace terracomp {

struct MeanShiftConfig {
  double bandwidth = 0.0;      // 0 = estimate from the data
  double merge_radius = 0.0;   // 0 = use the bandwidth
  double quantile = 0.15;
  std::size_t max_seeds = 2000;
  int max_iter = 300;
  double tol = 1e-3;
};

struct ClusteringConfig {
  std::string method = "gmm";  // kmeans | kmeanspp | meanshift | gmm
  int k = 4;
  std::string window_set = "window1";   // window1 | window2
  std::string feature_source = "window";  // window | raw
  int max_iter = 200;
  double tol = 1e-6;
  double cov_reg_scale = 1e-6;  // times the mean feature variance
  bool standardize = false;
  MeanShiftConfig mean_shift;
};

struct EvaluationConfig {
  int roi_pad = 5;
  std::vector<int> subset_ids = {9, 10, 11, 12, 13, 14, 15, 16};
  std::string fg_policy = "best_match";  // best_match | darkest_mean
};

struct PipelineConfig {
  std::uint64_t seed = 20240101;
  std::string output_dir = "out";

  bool use_phantom = true;
  PhantomSpec phantom;
  std::map<int, std::string> input_accumulated;  // wavelength -> raster path
  std::string input_truth;                       // body-id graymap path

  int median_window = 5;
  AutoCompressConfig terrace;
  std::map<int, std::uint64_t> min_body_area;  // per wavelength, pixels
  std::map<int, WindowSpec> window1;
  std::map<int, WindowSpec> window2;

  ClusteringConfig clustering;
  EvaluationConfig evaluation;
  bool export_surfaces = true;

  std::vector<int> wavelengths() const {
    if (use_phantom) return phantom.wavelengths_nm;
    std::vector<int> out;
    for (const auto& [nm, path] : input_accumulated) out.push_back(nm);
    return out;
  }

  void validate() const {
    if (use_phantom)
      phantom.validate();
    else if (input_accumulated.empty())
      throw std::invalid_argument(
          "config: either a phantom section or inputs.accumulated is required");
    if (median_window < 1 || median_window % 2 == 0)
      throw std::invalid_argument("config: preprocess.median_window must be odd");
    if (terrace.n_segments < 2)
      throw std::invalid_argument("config: terrace.n_segments must be >= 2");
    if (terrace.growth_factor <= 1.0)
      throw std::invalid_argument("config: terrace.growth_factor must exceed 1");
    if (terrace.level_cap < 1 || terrace.max_iterations < 0)
      throw std::invalid_argument("config: terrace.level_cap/max_iterations invalid");
    if (clustering.k < 1)
      throw std::invalid_argument("config: clustering.k must be >= 1");
    if (clustering.method != "kmeans" && clustering.method != "kmeanspp" &&
        clustering.method != "meanshift" && clustering.method != "gmm")
      throw std::invalid_argument("config: clustering.method must be one of "
                                  "kmeans, kmeanspp, meanshift, gmm");
    if (clustering.window_set != "window1" && clustering.window_set != "window2")
      throw std::invalid_argument(
          "config: clustering.window must be window1 or window2");
    if (clustering.feature_source != "window" &&
        clustering.feature_source != "raw")
      throw std::invalid_argument(
          "config: clustering.feature_source must be window or raw");
    if (evaluation.fg_policy != "best_match" &&
        evaluation.fg_policy != "darkest_mean")
      throw std::invalid_argument(
          "config: evaluation.fg_policy must be best_match or darkest_mean");
    if (evaluation.roi_pad < 0)
      throw std::invalid_argument("config: evaluation.roi_pad must be >= 0");
    for (int nm : wavelengths()) {
      if (!min_body_area.count(nm))
        throw std::invalid_argument("config: terrace.min_body_area missing entry "
                                    "for wavelength " + std::to_string(nm));
      const auto& set = clustering.window_set == "window1" ? window1 : window2;
      if (clustering.feature_source == "window" && !set.count(nm))
        throw std::invalid_argument("config: windows." + clustering.window_set +
                                    " missing entry for wavelength " +
                                    std::to_string(nm));
    }
    for (const auto& [nm, spec] : window1) {
      try {
        spec.validate();
      } catch (const std::exception& e) {
        throw std::invalid_argument("config: windows.window1[" +
                                    std::to_string(nm) + "]: " + e.what());
      }
    }
    for (const auto& [nm, spec] : window2) {
      try {
        spec.validate();
      } catch (const std::exception& e) {
        throw std::invalid_argument("config: windows.window2[" +
                                    std::to_string(nm) + "]: " + e.what());
      }
    }
  }
};

namespace detail {

using nlohmann::json;

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: field '" + key + "' has the wrong type");
  }
}

inline std::map<int, std::uint64_t> wavelength_counts(const json& j,
                                                      const std::string& field) {
  std::map<int, std::uint64_t> out;
  for (const auto& [key, val] : j.items()) {
    try {
      out[std::stoi(key)] = val.get<std::uint64_t>();
    } catch (...) {
      throw std::invalid_argument("config: " + field + " entry '" + key +
                                  "' must map a wavelength to a pixel count");
    }
  }
  return out;
}

inline std::map<int, WindowSpec> wavelength_windows(const json& j,
                                                    const std::string& field,
                                                    std::uint32_t out_max) {
  std::map<int, WindowSpec> out;
  for (const auto& [key, val] : j.items()) {
    try {
      WindowSpec spec;
      spec.low = val.at(0).get<std::uint32_t>();
      spec.high = val.at(1).get<std::uint32_t>();
      spec.out_max = out_max;
      out[std::stoi(key)] = spec;
    } catch (const std::invalid_argument&) {
      throw;
    } catch (...) {
      throw std::invalid_argument("config: " + field + " entry '" + key +
                                  "' must be a [low, high] pair");
    }
  }
  return out;
}

inline PhantomSpec phantom_from_json(const json& j) {
  PhantomSpec spec = default_phantom_spec();
  spec.width = get_or(j, "width", spec.width);
  spec.height = get_or(j, "height", spec.height);
  spec.grid_rows = get_or(j, "grid_rows", spec.grid_rows);
  spec.grid_cols = get_or(j, "grid_cols", spec.grid_cols);
  spec.body_size_px = get_or(j, "body_size_px", spec.body_size_px);
  spec.wavelengths_nm = get_or(j, "wavelengths_nm", spec.wavelengths_nm);
  spec.absorbance = get_or(j, "absorbance", spec.absorbance);
  spec.base_intensity = get_or(j, "base_intensity", spec.base_intensity);
  spec.thickness_thin = get_or(j, "thickness_thin", spec.thickness_thin);
  spec.thickness_thick = get_or(j, "thickness_thick", spec.thickness_thick);
  spec.radial_falloff = get_or(j, "radial_falloff", spec.radial_falloff);
  spec.blur_sigma_shallow = get_or(j, "blur_sigma_shallow", spec.blur_sigma_shallow);
  spec.blur_sigma_deep = get_or(j, "blur_sigma_deep", spec.blur_sigma_deep);
  spec.noise_sigma = get_or(j, "noise_sigma", spec.noise_sigma);
  spec.frames = get_or(j, "frames", spec.frames);
  spec.frame_max = get_or(j, "frame_max", spec.frame_max);

  const std::string noise = get_or<std::string>(j, "noise_model", "gaussian");
  if (noise == "gaussian")
    spec.noise_model = NoiseModel::gaussian;
  else if (noise == "poisson")
    spec.noise_model = NoiseModel::poisson;
  else
    throw std::invalid_argument(
        "config: phantom.noise_model must be gaussian or poisson");

  // default layout: type by column, thick/thin alternating by row, the
  // top half of the rows shallow and the bottom half deep
  std::vector<int> types_by_column = get_or(j, "types_by_column", std::vector<int>{});
  spec.assignments.assign(static_cast<std::size_t>(spec.slot_count()), {});
  for (int r = 0; r < spec.grid_rows; ++r)
    for (int c = 0; c < spec.grid_cols; ++c) {
      auto& a = spec.assignments[static_cast<std::size_t>(r * spec.grid_cols + c)];
      a.type = types_by_column.empty()
                   ? c % std::max<int>(1, static_cast<int>(spec.absorbance.size()))
                   : types_by_column[static_cast<std::size_t>(c) % types_by_column.size()];
      a.depth = (r < spec.grid_rows / 2) ? DepthClass::shallow : DepthClass::deep;
      a.thickness = (r % 2 == 0) ? ThicknessClass::thick : ThicknessClass::thin;
    }
  return spec;
}

}  // namespace detail

/// Built-in defaults: the full-size 16-body phantom with GMM (k = 4) over
/// window-one features. Matches configs/phantom_default.json.
PipelineConfig default_pipeline_config();

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  using detail::get_or;
  PipelineConfig cfg = default_pipeline_config();
  cfg.seed = get_or(j, "seed", cfg.seed);
  cfg.output_dir = get_or(j, "output_dir", cfg.output_dir);

  if (j.contains("inputs")) {
    cfg.use_phantom = false;
    const auto& in = j.at("inputs");
    if (in.contains("accumulated"))
      for (const auto& [key, val] : in.at("accumulated").items())
        cfg.input_accumulated[std::stoi(key)] = val.get<std::string>();
    cfg.input_truth = get_or<std::string>(in, "truth", "");
  }
  if (j.contains("phantom")) {
    cfg.use_phantom = true;
    cfg.phantom = detail::phantom_from_json(j.at("phantom"));
  }

  if (j.contains("preprocess"))
    cfg.median_window = get_or(j.at("preprocess"), "median_window", cfg.median_window);

  if (j.contains("terrace")) {
    const auto& t = j.at("terrace");
    cfg.terrace.n_segments = get_or(t, "n_segments", cfg.terrace.n_segments);
    cfg.terrace.gray_floor = get_or(t, "gray_floor", cfg.terrace.gray_floor);
    cfg.terrace.growth_factor = get_or(t, "growth_factor", cfg.terrace.growth_factor);
    cfg.terrace.level_cap = get_or(t, "level_cap", cfg.terrace.level_cap);
    cfg.terrace.max_iterations = get_or(t, "max_iterations", cfg.terrace.max_iterations);
    const std::string mode = get_or<std::string>(t, "demarcation_mode", "tail_max");
    if (mode == "tail_max")
      cfg.terrace.demarcation_mode = DemarcationMode::tail_max;
    else if (mode == "global_max")
      cfg.terrace.demarcation_mode = DemarcationMode::global_max;
    else
      throw std::invalid_argument(
          "config: terrace.demarcation_mode must be tail_max or global_max");
    if (t.contains("min_body_area"))
      cfg.min_body_area =
          detail::wavelength_counts(t.at("min_body_area"), "terrace.min_body_area");
  }

  if (j.contains("windows")) {
    const auto& w = j.at("windows");
    const auto out_max = get_or<std::uint32_t>(w, "out_max", 255);
    if (w.contains("window1"))
      cfg.window1 = detail::wavelength_windows(w.at("window1"), "windows.window1", out_max);
    if (w.contains("window2"))
      cfg.window2 = detail::wavelength_windows(w.at("window2"), "windows.window2", out_max);
  }

  if (j.contains("clustering")) {
    const auto& c = j.at("clustering");
    auto& cc = cfg.clustering;
    cc.method = get_or(c, "method", cc.method);
    cc.k = get_or(c, "k", cc.k);
    cc.window_set = get_or(c, "window", cc.window_set);
    cc.feature_source = get_or(c, "feature_source", cc.feature_source);
    cc.max_iter = get_or(c, "max_iter", cc.max_iter);
    cc.tol = get_or(c, "tol", cc.tol);
    cc.cov_reg_scale = get_or(c, "cov_reg_scale", cc.cov_reg_scale);
    cc.standardize = get_or(c, "standardize", cc.standardize);
    if (c.contains("mean_shift")) {
      const auto& m = c.at("mean_shift");
      cc.mean_shift.bandwidth = get_or(m, "bandwidth", cc.mean_shift.bandwidth);
      cc.mean_shift.merge_radius = get_or(m, "merge_radius", cc.mean_shift.merge_radius);
      cc.mean_shift.quantile = get_or(m, "quantile", cc.mean_shift.quantile);
      cc.mean_shift.max_seeds = get_or(m, "max_seeds", cc.mean_shift.max_seeds);
      cc.mean_shift.max_iter = get_or(m, "max_iter", cc.mean_shift.max_iter);
      cc.mean_shift.tol = get_or(m, "tol", cc.mean_shift.tol);
    }
  }

  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    cfg.evaluation.roi_pad = get_or(e, "roi_pad", cfg.evaluation.roi_pad);
    cfg.evaluation.subset_ids = get_or(e, "subset_ids", cfg.evaluation.subset_ids);
    cfg.evaluation.fg_policy = get_or(e, "fg_policy", cfg.evaluation.fg_policy);
  }

  if (j.contains("export"))
    cfg.export_surfaces = get_or(j.at("export"), "surfaces", cfg.export_surfaces);

  return cfg;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: parse error in " + path + ": " + e.what());
  }
  return pipeline_config_from_json(j);
}

/// The resolved configuration serialized back to JSON (written into the
/// output directory for reproducibility).
inline nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
  using nlohmann::json;
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  if (cfg.use_phantom) {
    json p;
    const auto& ph = cfg.phantom;
    p["width"] = ph.width;
    p["height"] = ph.height;
    p["grid_rows"] = ph.grid_rows;
    p["grid_cols"] = ph.grid_cols;
    p["body_size_px"] = ph.body_size_px;
    p["wavelengths_nm"] = ph.wavelengths_nm;
    p["absorbance"] = ph.absorbance;
    p["base_intensity"] = ph.base_intensity;
    p["thickness_thin"] = ph.thickness_thin;
    p["thickness_thick"] = ph.thickness_thick;
    p["radial_falloff"] = ph.radial_falloff;
    p["blur_sigma_shallow"] = ph.blur_sigma_shallow;
    p["blur_sigma_deep"] = ph.blur_sigma_deep;
    p["noise_sigma"] = ph.noise_sigma;
    p["noise_model"] = ph.noise_model == NoiseModel::gaussian ? "gaussian" : "poisson";
    p["frames"] = ph.frames;
    p["frame_max"] = ph.frame_max;
    j["phantom"] = p;
  } else {
    json in;
    for (const auto& [nm, path] : cfg.input_accumulated)
      in["accumulated"][std::to_string(nm)] = path;
    if (!cfg.input_truth.empty()) in["truth"] = cfg.input_truth;
    j["inputs"] = in;
  }
  j["preprocess"]["median_window"] = cfg.median_window;
  auto& t = j["terrace"];
  t["n_segments"] = cfg.terrace.n_segments;
  t["gray_floor"] = cfg.terrace.gray_floor;
  t["demarcation_mode"] =
      cfg.terrace.demarcation_mode == DemarcationMode::tail_max ? "tail_max"
                                                                : "global_max";
  t["growth_factor"] = cfg.terrace.growth_factor;
  t["level_cap"] = cfg.terrace.level_cap;
  t["max_iterations"] = cfg.terrace.max_iterations;
  for (const auto& [nm, area] : cfg.min_body_area)
    t["min_body_area"][std::to_string(nm)] = area;
  for (const auto& [nm, spec] : cfg.window1)
    j["windows"]["window1"][std::to_string(nm)] = {spec.low, spec.high};
  for (const auto& [nm, spec] : cfg.window2)
    j["windows"]["window2"][std::to_string(nm)] = {spec.low, spec.high};
  auto& c = j["clustering"];
  c["method"] = cfg.clustering.method;
  c["k"] = cfg.clustering.k;
  c["window"] = cfg.clustering.window_set;
  c["feature_source"] = cfg.clustering.feature_source;
  c["max_iter"] = cfg.clustering.max_iter;
  c["tol"] = cfg.clustering.tol;
  c["cov_reg_scale"] = cfg.clustering.cov_reg_scale;
  c["standardize"] = cfg.clustering.standardize;
  c["mean_shift"] = {{"bandwidth", cfg.clustering.mean_shift.bandwidth},
                     {"merge_radius", cfg.clustering.mean_shift.merge_radius},
                     {"quantile", cfg.clustering.mean_shift.quantile},
                     {"max_seeds", cfg.clustering.mean_shift.max_seeds},
                     {"max_iter", cfg.clustering.mean_shift.max_iter},
                     {"tol", cfg.clustering.mean_shift.tol}};
  j["evaluation"] = {{"roi_pad", cfg.evaluation.roi_pad},
                     {"subset_ids", cfg.evaluation.subset_ids},
                     {"fg_policy", cfg.evaluation.fg_policy}};
  j["export"]["surfaces"] = cfg.export_surfaces;
  return j;
}

inline PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.phantom = default_phantom_spec();
  // window presets read off the default-seed phantom run: window one cuts
  // at the bodies' edge gray level, window two keeps only the shallow
  // (sharp) bodies
  const std::map<int, std::uint32_t> w1{{410, 16}, {450, 17}, {500, 18},
                                        {590, 17}, {660, 16}, {734, 17}};
  const std::map<int, std::uint32_t> w2{{410, 13}, {450, 12}, {500, 17},
                                        {590, 15}, {660, 14}, {734, 15}};
  for (int nm : cfg.phantom.wavelengths_nm) {
    cfg.min_body_area[nm] = 900;
    cfg.window1[nm] = WindowSpec{0, w1.at(nm), 255};
    cfg.window2[nm] = WindowSpec{0, w2.at(nm), 255};
  }
  return cfg;
}

}  // namespace terracomp
