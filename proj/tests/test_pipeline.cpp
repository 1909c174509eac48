#include "terracomp/pipeline.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

using namespace terracomp;
namespace fs = std::filesystem;

namespace {

fs::path unique_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() /
                     ("terracomp_pipe_" + std::to_string(::getpid()) + "_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// desk-scale phantom: same structure as the full run, seconds to execute
PipelineConfig small_config(const fs::path& out) {
  PipelineConfig cfg = default_pipeline_config();
  cfg.seed = 4242;
  cfg.output_dir = out.string();
  cfg.phantom.width = 120;
  cfg.phantom.height = 112;
  cfg.phantom.body_size_px = 14;
  cfg.phantom.frames = 20;
  cfg.phantom.noise_sigma = 1.5;
  cfg.terrace.gray_floor = 150;  // accumulated range is only a few hundred
  for (int nm : cfg.phantom.wavelengths_nm) {
    cfg.min_body_area[nm] = 100;
    cfg.window1[nm] = WindowSpec{0, 200, 255};
    cfg.window2[nm] = WindowSpec{0, 120, 255};
  }
  return cfg;
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("TERRACOMP_CLI");
  if (cli == nullptr) return -999;
  const std::string cmd = std::string(cli) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Pipeline, WritesEveryArtifact) {
  const auto out = unique_dir("artifacts");
  auto cfg = small_config(out);
  const auto result = run_pipeline(cfg);

  for (int nm : cfg.phantom.wavelengths_nm) {
    const std::string nmtxt = std::to_string(nm) + "nm";
    EXPECT_TRUE(fs::exists(out / ("accumulated_" + nmtxt + ".r32")));
    EXPECT_TRUE(fs::exists(out / ("filtered_" + nmtxt + ".r32")));
    EXPECT_TRUE(fs::exists(out / ("compressed_" + nmtxt + ".pgm")));
    EXPECT_TRUE(fs::exists(out / ("windowed_window1_" + nmtxt + ".pgm")));
    EXPECT_TRUE(fs::exists(out / ("surface_" + nmtxt + ".txt")));
  }
  EXPECT_TRUE(fs::exists(out / "truth.pgm"));
  EXPECT_TRUE(fs::exists(out / "labels.pgm"));
  EXPECT_TRUE(fs::exists(out / "thresholds.csv"));
  EXPECT_TRUE(fs::exists(out / "windows.csv"));
  EXPECT_TRUE(fs::exists(out / "dice.csv"));
  EXPECT_TRUE(fs::exists(out / "model_gmm.csv"));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));

  // dice table: header + 16 bodies + overall + subset rows
  const std::string dice_text = read_bytes(out / "dice.csv");
  EXPECT_EQ(std::count(dice_text.begin(), dice_text.end(), '\n'), 19);
  EXPECT_EQ(result.dice.per_body.size(), 16u);

  const std::string manifest = read_bytes(out / "manifest.json");
  EXPECT_NE(manifest.find("\"complete\": true"), std::string::npos);

  // thresholds: compression stayed under the cap and echoed the inputs
  ASSERT_EQ(result.thresholds.size(), 6u);
  for (const auto& row : result.thresholds) {
    EXPECT_LE(row.selection.compressed_max_level, 255);
    EXPECT_GE(row.selection.gradient_threshold, 1u);
  }
  fs::remove_all(out);
}

TEST(Pipeline, DeterministicAcrossRuns) {
  const auto out_a = unique_dir("det_a");
  const auto out_b = unique_dir("det_b");
  auto cfg_a = small_config(out_a);
  auto cfg_b = small_config(out_b);
  run_pipeline(cfg_a);
  run_pipeline(cfg_b);

  std::vector<std::string> names = {"truth.pgm", "labels.pgm", "thresholds.csv",
                                    "windows.csv", "dice.csv", "model_gmm.csv"};
  for (int nm : cfg_a.phantom.wavelengths_nm) {
    const std::string nmtxt = std::to_string(nm) + "nm";
    names.push_back("accumulated_" + nmtxt + ".r32");
    names.push_back("filtered_" + nmtxt + ".r32");
    names.push_back("compressed_" + nmtxt + ".pgm");
    names.push_back("windowed_window1_" + nmtxt + ".pgm");
    names.push_back("surface_" + nmtxt + ".txt");
  }
  for (const auto& name : names)
    EXPECT_EQ(read_bytes(out_a / name), read_bytes(out_b / name)) << name;
  fs::remove_all(out_a);
  fs::remove_all(out_b);
}

TEST(Pipeline, StageByStageMatchesSingleShot) {
  const auto shot = unique_dir("shot");
  const auto staged = unique_dir("staged");
  auto cfg = small_config(shot);
  run_pipeline(cfg);

  // replay every stage through persisted intermediates
  std::vector<Raster> accumulated, filtered, compressed, windowed;
  for (std::size_t li = 0; li < cfg.phantom.wavelengths_nm.size(); ++li) {
    const int nm = cfg.phantom.wavelengths_nm[li];
    const std::string nmtxt = std::to_string(nm) + "nm";

    // frames to disk, then accumulate from the files
    const fs::path fdir = staged / ("frames_" + nmtxt);
    fs::create_directories(fdir);
    int index = 0;
    phantom_for_each_frame(cfg.phantom, li, [&](const Raster& fr) {
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%04d.pgm", index++);
      write_pgm(fr, (fdir / name).string());
    });
    FrameStack stack;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(fdir)) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) stack.frames.push_back(read_raster(f.string()));
    accumulated.push_back(accumulate_frames(stack));
    write_raster(accumulated.back(), (staged / ("accumulated_" + nmtxt + ".r32")).string());
    EXPECT_EQ(read_bytes(staged / ("accumulated_" + nmtxt + ".r32")),
              read_bytes(shot / ("accumulated_" + nmtxt + ".r32")));

    filtered.push_back(median_filter(
        read_raster((staged / ("accumulated_" + nmtxt + ".r32")).string()),
        cfg.median_window));
    write_raster(filtered.back(), (staged / ("filtered_" + nmtxt + ".r32")).string());
    EXPECT_EQ(read_bytes(staged / ("filtered_" + nmtxt + ".r32")),
              read_bytes(shot / ("filtered_" + nmtxt + ".r32")));

    const auto comp = auto_compress(
        read_raster((staged / ("filtered_" + nmtxt + ".r32")).string()),
        cfg.min_body_area.at(nm), cfg.terrace);
    compressed.push_back(comp.image);
    write_raster(compressed.back(), (staged / ("compressed_" + nmtxt + ".pgm")).string());
    EXPECT_EQ(read_bytes(staged / ("compressed_" + nmtxt + ".pgm")),
              read_bytes(shot / ("compressed_" + nmtxt + ".pgm")));

    windowed.push_back(window_transform(
        read_raster((staged / ("compressed_" + nmtxt + ".pgm")).string()),
        cfg.window1.at(nm)));
    write_raster(windowed.back(),
                 (staged / ("windowed_window1_" + nmtxt + ".pgm")).string());
    EXPECT_EQ(read_bytes(staged / ("windowed_window1_" + nmtxt + ".pgm")),
              read_bytes(shot / ("windowed_window1_" + nmtxt + ".pgm")));
  }

  MultiChannelImage stack;
  for (std::size_t li = 0; li < cfg.phantom.wavelengths_nm.size(); ++li)
    stack.channels.push_back({cfg.phantom.wavelengths_nm[li], windowed[li]});
  const auto clusters = run_clustering(stack_channels(stack), cfg.clustering, cfg.seed);
  const Raster labels = make_label_image(clusters.labels, stack.channels[0].image.width,
                                         stack.channels[0].image.height,
                                         clusters.cluster_count);
  write_raster(labels, (staged / "labels.pgm").string());
  EXPECT_EQ(read_bytes(staged / "labels.pgm"), read_bytes(shot / "labels.pgm"));

  const auto truth = template_from_id_map(read_raster((shot / "truth.pgm").string()));
  EvaluateOptions opts;
  opts.roi_pad = cfg.evaluation.roi_pad;
  opts.subset_ids = cfg.evaluation.subset_ids;
  opts.method_name = "gmm_window1";
  const auto report = evaluate(read_raster((staged / "labels.pgm").string()), truth, opts);
  write_text_file((staged / "dice.csv").string(), dice_csv({report}));
  EXPECT_EQ(read_bytes(staged / "dice.csv"), read_bytes(shot / "dice.csv"));

  fs::remove_all(shot);
  fs::remove_all(staged);
}

TEST(Pipeline, RawFeatureModeSkipsCompression) {
  const auto out = unique_dir("raw");
  auto cfg = small_config(out);
  cfg.clustering.feature_source = "raw";
  const auto result = run_pipeline(cfg);
  EXPECT_TRUE(result.thresholds.empty());
  EXPECT_FALSE(fs::exists(out / "thresholds.csv"));
  EXPECT_TRUE(fs::exists(out / "labels.pgm"));
  const std::string manifest = read_bytes(out / "manifest.json");
  EXPECT_NE(manifest.find("skipped"), std::string::npos);
  EXPECT_EQ(result.dice.per_body.size(), 16u);
  fs::remove_all(out);
}

TEST(Pipeline, LabelCountRespectsK) {
  const auto out = unique_dir("k7");
  auto cfg = small_config(out);
  cfg.clustering.k = 7;
  cfg.clustering.window_set = "window2";
  run_pipeline(cfg);
  const Raster labels = read_raster((out / "labels.pgm").string());
  std::set<std::uint32_t> distinct(labels.data.begin(), labels.data.end());
  EXPECT_LE(distinct.size(), 7u);
  fs::remove_all(out);
}

TEST(Pipeline, ValidationNamesMissingField) {
  auto cfg = small_config(unique_dir("bad"));
  cfg.min_body_area.erase(450);
  try {
    run_pipeline(cfg);
    FAIL() << "expected validation error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("min_body_area"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("450"), std::string::npos);
  }

  cfg = small_config(unique_dir("bad2"));
  cfg.window1[410] = WindowSpec{10, 10, 255};
  try {
    run_pipeline(cfg);
    FAIL() << "expected validation error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("window1[410]"), std::string::npos);
  }
}

TEST(Pipeline, StageErrorsCarryContext) {
  const auto out = unique_dir("constimg");
  auto cfg = small_config(out);
  cfg.phantom.noise_sigma = 0.0;
  cfg.phantom.radial_falloff = 0.0;
  for (auto& row : cfg.phantom.absorbance)
    for (auto& mu : row) mu = 0.0;  // constant image: compression degenerates
  try {
    run_pipeline(cfg);
    FAIL() << "expected stage failure";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stage compress"), std::string::npos);
    EXPECT_NE(msg.find("410nm"), std::string::npos);
    EXPECT_NE(msg.find("degenerate"), std::string::npos);
  }
  const std::string manifest = read_bytes(out / "manifest.json");
  EXPECT_NE(manifest.find("failed"), std::string::npos);
  EXPECT_NE(manifest.find("\"complete\": false"), std::string::npos);
  fs::remove_all(out);
}

TEST(Config, JsonRoundTripAndOverlays) {
  const auto dir = unique_dir("config");
  const PipelineConfig def = default_pipeline_config();
  const auto path = dir / "cfg.json";
  write_text_file(path.string(), pipeline_config_to_json(def).dump(2));
  const PipelineConfig loaded = load_pipeline_config(path.string());
  EXPECT_EQ(loaded.seed, def.seed);
  EXPECT_EQ(loaded.phantom.width, def.phantom.width);
  EXPECT_EQ(loaded.phantom.absorbance, def.phantom.absorbance);
  EXPECT_EQ(loaded.window1.at(410).high, def.window1.at(410).high);
  EXPECT_EQ(loaded.min_body_area.at(734), def.min_body_area.at(734));
  EXPECT_EQ(loaded.clustering.method, def.clustering.method);
  EXPECT_NO_THROW(loaded.validate());

  // partial config: unspecified keys fall back to defaults
  write_text_file(path.string(), R"({"seed": 7, "clustering": {"k": 9}})");
  const PipelineConfig partial = load_pipeline_config(path.string());
  EXPECT_EQ(partial.seed, 7u);
  EXPECT_EQ(partial.clustering.k, 9);
  EXPECT_EQ(partial.phantom.frames, def.phantom.frames);

  write_text_file(path.string(), "{not json");
  EXPECT_THROW(load_pipeline_config(path.string()), std::invalid_argument);
  write_text_file(path.string(), R"({"clustering": {"k": "many"}})");
  EXPECT_THROW(load_pipeline_config(path.string()), std::invalid_argument);
  EXPECT_THROW(load_pipeline_config((dir / "absent.json").string()),
               std::invalid_argument);

  // the shipped example config mirrors the built-in defaults
  const char* src_dir = std::getenv("TERRACOMP_SOURCE_DIR");
  if (src_dir != nullptr) {
    const PipelineConfig shipped = load_pipeline_config(
        (fs::path(src_dir) / "configs" / "phantom_default.json").string());
    EXPECT_NO_THROW(shipped.validate());
    EXPECT_EQ(shipped.seed, def.seed);
    EXPECT_EQ(shipped.phantom.radial_falloff, def.phantom.radial_falloff);
    EXPECT_EQ(shipped.window1.at(500).high, def.window1.at(500).high);
    EXPECT_EQ(shipped.window2.at(660).high, def.window2.at(660).high);
  }
  fs::remove_all(dir);
}

TEST(PipelineCli, ExitCodes) {
  if (std::getenv("TERRACOMP_CLI") == nullptr)
    GTEST_SKIP() << "TERRACOMP_CLI not set";

  const auto dir = unique_dir("cli");
  const auto constant = dir / "constant.pgm";
  write_pgm(Raster(8, 8, 9, 9), constant.string());

  // degenerate compression input -> validation exit code
  EXPECT_EQ(run_cli("compress --input " + constant.string() + " --output " +
                    (dir / "out.pgm").string() + " --min-body-area 4"),
            1);

  // window with low >= high -> validation error naming the field
  EXPECT_EQ(run_cli("window --input " + constant.string() + " --output " +
                    (dir / "w.pgm").string() + " --low 10 --high 10"),
            1);

  // evaluate with mismatched dimensions -> explicit dimension error
  Raster ids(6, 6, 1, 0);
  ids.at(2, 2) = 1;
  write_pgm(ids, (dir / "truth.pgm").string());
  Raster labels(8, 8, 1, 0);
  write_pgm(labels, (dir / "labels.pgm").string());
  EXPECT_EQ(run_cli("evaluate --labels " + (dir / "labels.pgm").string() +
                    " --truth " + (dir / "truth.pgm").string()),
            1);

  // missing file -> runtime exit code
  EXPECT_EQ(run_cli("filter --input " + (dir / "nope.pgm").string() +
                    " --output " + (dir / "f.pgm").string()),
            2);

  // surface export round trip works end to end
  EXPECT_EQ(run_cli("export-surface --input " + constant.string() +
                    " --output " + (dir / "s.txt").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "s.txt"));
  fs::remove_all(dir);
}
