#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "terracomp/evaluation.hpp"
#include "terracomp/gmm.hpp"
#include "terracomp/kmeans.hpp"
#include "terracomp/mean_shift.hpp"
#include "terracomp/terrace.hpp"
#include "terracomp/window.hpp"

namespace terracomp {

/// Reals use a dot decimal separator and 6 significant digits; integers are
/// exact.
inline std::string csv_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string gray_range_text(std::uint64_t lo, std::uint64_t hi) {
  return std::to_string(lo) + "-" + std::to_string(hi);
}

struct ThresholdRow {
  int wavelength_nm = 0;
  std::uint64_t pre_min = 0, pre_max = 0;
  std::uint64_t input_area = 0;
  ThresholdSelection selection;
};

/// One row per wavelength: pre-compression range, input parameter, obtained
/// gradient and area thresholds, post-compression range.
inline std::string thresholds_csv(const std::vector<ThresholdRow>& rows) {
  std::string out =
      "wavelength_nm,range_before,input_area,gradient_threshold,"
      "area_threshold,range_after\n";
  for (const auto& r : rows) {
    out += std::to_string(r.wavelength_nm) + "," +
           gray_range_text(r.pre_min, r.pre_max) + "," +
           std::to_string(r.input_area) + "," +
           std::to_string(r.selection.gradient_threshold) + "," +
           std::to_string(r.selection.area_threshold) + "," +
           gray_range_text(1, static_cast<std::uint64_t>(
                                  r.selection.compressed_max_level)) +
           "\n";
  }
  return out;
}

struct WindowRow {
  int wavelength_nm = 0;
  int compressed_max_level = 0;
  WindowSpec window_one;
  WindowSpec window_two;
};

/// Wavelengths across the columns, one row per range kind.
inline std::string windows_csv(const std::vector<WindowRow>& rows) {
  std::string header = "wavelength_nm", comp = "compressed_range",
              w1 = "window_one", w2 = "window_two";
  for (const auto& r : rows) {
    header += "," + std::to_string(r.wavelength_nm);
    comp += "," + gray_range_text(
                      1, static_cast<std::uint64_t>(r.compressed_max_level));
    w1 += "," + gray_range_text(r.window_one.low, r.window_one.high);
    w2 += "," + gray_range_text(r.window_two.low, r.window_two.high);
  }
  return header + "\n" + comp + "\n" + w1 + "\n" + w2 + "\n";
}

/// Per-body Dice table with one column per method, closed by the overall
/// and subset average rows.
inline std::string dice_csv(const std::vector<DiceReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("dice_csv: no reports");
  const std::size_t n_bodies = reports.front().per_body.size();
  for (const auto& r : reports)
    if (r.per_body.size() != n_bodies)
      throw std::invalid_argument("dice_csv: body counts differ across methods");

  std::string out = "body_id";
  for (const auto& r : reports) out += "," + r.method;
  out += "\n";
  for (std::size_t b = 0; b < n_bodies; ++b) {
    out += std::to_string(b + 1);
    for (const auto& r : reports) out += "," + csv_real(r.per_body[b]);
    out += "\n";
  }
  out += "overall_average";
  for (const auto& r : reports) out += "," + csv_real(r.overall_average);
  out += "\nsubset_average";
  for (const auto& r : reports) out += "," + csv_real(r.subset_average);
  out += "\n";
  return out;
}

/// One row per component: weight, mean vector, covariance flattened
/// row-major.
inline std::string gmm_model_csv(const GmmModel& model) {
  std::string out = "component,weight";
  for (std::size_t a = 0; a < model.n_dims; ++a)
    out += ",mean_" + std::to_string(a);
  for (std::size_t a = 0; a < model.n_dims; ++a)
    for (std::size_t b = 0; b < model.n_dims; ++b)
      out += ",cov_" + std::to_string(a) + "_" + std::to_string(b);
  out += "\n";
  for (int c = 0; c < model.k; ++c) {
    out += std::to_string(c) + "," +
           csv_real(model.weights[static_cast<std::size_t>(c)]);
    for (double m : model.mean(c)) out += "," + csv_real(m);
    for (double v : model.covariance(c)) out += "," + csv_real(v);
    out += "\n";
  }
  return out;
}

inline std::string centroid_model_csv(const CentroidModel& model) {
  std::string out = "component";
  for (std::size_t a = 0; a < model.n_dims; ++a)
    out += ",centroid_" + std::to_string(a);
  out += "\n";
  for (int c = 0; c < model.k; ++c) {
    out += std::to_string(c);
    for (double m : model.centroid(c)) out += "," + csv_real(m);
    out += "\n";
  }
  return out;
}

inline std::string modes_csv(const MeanShiftResult& res) {
  std::string out = "mode";
  for (std::size_t a = 0; a < res.n_dims; ++a)
    out += ",coord_" + std::to_string(a);
  out += "\n";
  for (std::size_t m = 0; m < res.mode_count(); ++m) {
    out += std::to_string(m);
    for (double v : res.mode(m)) out += "," + csv_real(v);
    out += "\n";
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace terracomp
