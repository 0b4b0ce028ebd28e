#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "berrystack/cli.hpp"
#include "berrystack/errors.hpp"
#include "berrystack/image.hpp"
#include "berrystack/io_util.hpp"

using namespace berrystack;
using namespace berrystack::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "berrystack_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "berrystack");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return main_entry(static_cast<int>(argv.size()), argv.data());
}

int run_cmd(const std::string& cmd, const fs::path& config, const fs::path& out) {
  return run({cmd, "--config", config.string(), "--out", out.string()});
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

// Synthetic bispectral data, prepared and split, plus a trained ensemble.
struct Pipeline {
  fs::path dir, config;
};

const Pipeline& pipeline() {
  static const Pipeline p = [] {
    Pipeline pl{scratch("pipeline"), {}};
    pl.config = pl.dir / "run.ini";
    write_file(pl.config, R"([run]
seed = 7

[synth]
samples = 120

[data]
manifest = synth/all.tsv
prepared = true
train = prep/train_oversampled.tsv
validation = prep/validation.tsv
test = prep/test.tsv

[extractor]
dim = 64

[model]
fc = 32x16
epochs = 15
path = train/model.bstk

[ensemble]
learners = 3
path = ens/ensemble
)");
    REQUIRE(run_cmd("synth", pl.config, pl.dir / "synth") == 0);
    REQUIRE(run_cmd("prepare", pl.config, pl.dir / "prep") == 0);
    REQUIRE(run_cmd("train", pl.config, pl.dir / "train") == 0);
    REQUIRE(run_cmd("train-ensemble", pl.config, pl.dir / "ens") == 0);
    return pl;
  }();
  return p;
}

}  // namespace

TEST_CASE("RunConfig parsing") {
  const fs::path base = "/tmp";
  SUBCASE("values and defaults") {
    const auto c = RunConfig::parse("[run]\nseed = 12\n[model]\nfc = 64x32\nepochs = 7\n", base);
    CHECK(c.seed() == 12);
    CHECK(c.text("model", "fc") == "64x32");
    CHECK(c.integer("model", "epochs") == 7);
    CHECK(c.number_or("model", "learning_rate", 0.5) == 0.5);
    CHECK_FALSE(c.has("model", "learning_rate"));
    const auto m = model_config(c);
    CHECK(m.fc.n1 == 64);
    CHECK(m.schedule.epochs == 7);
    CHECK(m.seed == 12);
  }
  SUBCASE("strict keys and sections") {
    CHECK_THROWS_AS(RunConfig::parse("[run]\nseed = 1\n[model]\nlerning_rate = 0.1\n", base),
                    ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[run]\nseed = 1\n[modle]\nfc = 8x8\n", base), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("seed = 1\n", base), ConfigError);
    CHECK_THROWS_AS(RunConfig::parse("[run]\nseed = 1\nseed = 2\n", base), ConfigError);
  }
  SUBCASE("seed is mandatory, --seed overrides") {
    CHECK_THROWS_AS(RunConfig::parse("[model]\nfc = 8x8\n", base), ConfigError);
    CHECK(RunConfig::parse("[model]\nfc = 8x8\n", base, 5).seed() == 5);
    CHECK(RunConfig::parse("[run]\nseed = 3\n", base, 9).seed() == 9);
    CHECK_THROWS_AS(RunConfig::parse("[run]\nseed = -3\n", base), ConfigError);
  }
  SUBCASE("malformed values") {
    const auto c = RunConfig::parse(
        "[run]\nseed = 1\n[model]\nepochs = ten\nlearning_rate = 1e-3x\n[data]\nprepared = maybe\n",
        base);
    CHECK_THROWS_AS(c.integer("model", "epochs"), ConfigError);
    CHECK_THROWS_AS(c.number("model", "learning_rate"), ConfigError);
    CHECK_THROWS_AS(c.flag_or("data", "prepared", false), ConfigError);
    CHECK_THROWS_AS(model_config(RunConfig::parse("[run]\nseed=1\n[model]\nbatch_size = 0\n", base)),
                    ConfigError);
    CHECK_THROWS_AS(model_config(RunConfig::parse("[run]\nseed=1\n[model]\nfc = 8\n", base)),
                    ConfigError);
  }
  SUBCASE("digest") {
    const std::string text = "[run]\nseed = 1\nout = a\n[model]\nfc = 8x8\n";
    const auto a = RunConfig::parse(text, base);
    CHECK(a.digest() == RunConfig::parse(text, base).digest());
    CHECK(a.digest() == RunConfig::parse("[model]\nfc = 8x8\n[run]\nseed = 1\nout = b\n", base).digest());
    CHECK(a.digest() != RunConfig::parse(text, base, 2).digest());
    CHECK(a.digest() != RunConfig::parse("[run]\nseed = 1\n[model]\nfc = 8x4\n", base).digest());
  }
  SUBCASE("paths resolve against the config directory") {
    const fs::path dir = scratch("paths");
    write_file(dir / "m.tsv", "x");
    const auto c = RunConfig::parse("[run]\nseed=1\nout = res\n[data]\nmanifest = m.tsv\ntest = none.tsv\n", dir);
    CHECK(c.input_path("data", "manifest") == dir / "m.tsv");
    CHECK_THROWS_AS(c.input_path("data", "test"), ConfigError);
    CHECK(c.out_dir() == dir / "res");
  }
  SUBCASE("grid and augmentation sections") {
    const auto c = RunConfig::parse(
        "[run]\nseed=1\n[tuning]\nfc = 16x8, 32x16\noptimizers = sgd\nepochs = 5,10\nmetric = precision\n"
        "[augmentation]\nrotation = 0\nzoom_lo = 1\nzoom_hi = 1\nbrightness_lo = 1\nbrightness_hi = 1\n",
        base);
    const auto g = grid_spec(c);
    CHECK(g.fc.size() == 2);
    CHECK(g.optimizers == std::vector<nn::OptimizerKind>{nn::OptimizerKind::sgd});
    CHECK(g.batch_sizes == tuning::GridSpec::default_grid().batch_sizes);
    CHECK(g.epochs == std::vector<int>{5, 10});
    CHECK(g.metric == tuning::SelectionMetric::precision);
    CHECK(augmentation_spec(c, true).is_identity());
    const auto defaults = augmentation_spec(RunConfig::parse("[run]\nseed=1\n", base), true);
    CHECK(defaults.max_rotation_deg == 10.0);
    CHECK(defaults.zoom_range == std::array<double, 2>{0.2, 1.0});
    CHECK(augmentation_spec(RunConfig::parse("[run]\nseed=1\n", base), false).brightness_range ==
          std::array<double, 2>{1.0, 1.0});
  }
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(std::make_exception_ptr(ConfigError("x"))) == 2);
  CHECK(exit_code_for(std::make_exception_ptr(ArgumentError("x"))) == 2);
  CHECK(exit_code_for(std::make_exception_ptr(FormatError("x"))) == 3);
  CHECK(exit_code_for(std::make_exception_ptr(NumericError("x"))) == 4);
  CHECK(exit_code_for(std::make_exception_ptr(TrainingError("x"))) == 4);

  const fs::path dir = scratch("exit");
  CHECK(run({}) == 2);
  CHECK(run({"train"}) == 2);  // --config is required
  CHECK(run({"train", "--config", (dir / "absent.ini").string()}) == 2);
  write_file(dir / "typo.ini", "[run]\nseed = 1\n[ensemble]\nlerners = 5\n");
  CHECK(run_cmd("train-ensemble", dir / "typo.ini", dir / "o") == 2);
  write_file(dir / "noextractor.ini",
             "[run]\nseed = 1\n[extractor]\nkind = file\npath = missing.bstk\n");
  CHECK(run_cmd("train", dir / "noextractor.ini", dir / "o") == 2);
  write_file(dir / "corrupt.tsv", "berry_id\tfarm\n");
  write_file(dir / "corrupt.ini", "[run]\nseed = 1\n[data]\nmanifest = corrupt.tsv\n");
  CHECK(run_cmd("prepare", dir / "corrupt.ini", dir / "o") == 3);
}

TEST_CASE("select-wavelengths") {
  const fs::path dir = scratch("spectral");
  std::string cfg = "[run]\nseed = 5\n[synth]\nkind = spectral\n[spectral]\n";
  for (const char* n : {"raw", "white", "dark"}) {
    cfg += fmt::format("{0}_header = cubes/{0}.hdr\n{0}_data = cubes/{0}.bin\n", n);
  }
  std::string masks;
  for (int c = 0; c < 5; ++c) masks += fmt::format("mask_{0} = cubes/mask_{0}.pgm\n", c);
  write_file(dir / "run.ini", cfg + masks);
  REQUIRE(run_cmd("synth", dir / "run.ini", dir / "cubes") == 0);
  REQUIRE(run_cmd("select-wavelengths", dir / "run.ini", dir / "a") == 0);
  CHECK(slurp(dir / "a" / "wavelengths.tsv") == "band\twavelength_nm\nvisible\t700\nnir\t770\n");
  REQUIRE(run_cmd("select-wavelengths", dir / "run.ini", dir / "b") == 0);
  CHECK(slurp(dir / "a" / "spectra.tsv") == slurp(dir / "b" / "spectra.tsv"));
  CHECK(fs::exists(dir / "a" / "run_manifest.json"));

  std::string missing_mask = cfg;
  for (int c = 0; c < 4; ++c) missing_mask += fmt::format("mask_{0} = cubes/mask_{0}.pgm\n", c);
  write_file(dir / "missing.ini", missing_mask);
  CHECK(run_cmd("select-wavelengths", dir / "missing.ini", dir / "c") == 2);
  fs::remove(dir / "cubes" / "mask_2.pgm");
  CHECK(run_cmd("select-wavelengths", dir / "run.ini", dir / "c") == 2);
}

TEST_CASE("prepare") {
  const fs::path dir = scratch("prepare");
  write_file(dir / "run.ini", R"([run]
seed = 3
[synth]
kind = stereo
samples = 201
unripe_fraction = 0.184
[data]
manifest = raw/frames.tsv
bboxes = raw/bboxes.tsv
)");
  REQUIRE(run_cmd("synth", dir / "run.ini", dir / "raw") == 0);
  REQUIRE(run_cmd("prepare", dir / "run.ini", dir / "a") == 0);
  CHECK(slurp(dir / "a" / "class_counts.tsv") ==
        "split\tripe\tunripe\ttotal\ntrain\t98\t22\t120\nvalidation\t32\t7\t39\n"
        "test\t34\t8\t42\ntrain_oversampled\t98\t98\t196\n");
  REQUIRE(run_cmd("prepare", dir / "run.ini", dir / "b") == 0);
  for (const char* m : {"train.tsv", "validation.tsv", "test.tsv", "train_oversampled.tsv"}) {
    CHECK(slurp(dir / "a" / m) == slurp(dir / "b" / m));
  }

  SUBCASE("odd-width frame") {
    const auto rows = data::read_manifest(dir / "raw" / "frames.tsv");
    const fs::path frame = dir / "raw" / rows[5].path_700;
    Gray8 odd{95, 48, std::vector<std::uint8_t>(95 * 48, 128)};
    write_pgm(odd, frame);
    CHECK(run_cmd("prepare", dir / "run.ini", dir / "c") == 2);
  }
  SUBCASE("class below the minimum") {
    write_file(dir / "min.ini", slurp(dir / "run.ini") + "min_per_class = 40\n");
    CHECK(run_cmd("prepare", dir / "min.ini", dir / "d") == 2);
  }
}

TEST_CASE("train, evaluate and robustness") {
  const auto& p = pipeline();
  CHECK(fs::exists(p.dir / "train" / "model.bstk"));
  CHECK(fs::exists(p.dir / "ens" / "ensemble" / "meta.txt"));
  const std::string manifest = slurp(p.dir / "ens" / "run_manifest.json");
  CHECK(manifest.find("\"command\": \"train-ensemble\"") != std::string::npos);
  CHECK(manifest.find("meta_learner.tsv") != std::string::npos);

  for (const char* source : {"model", "ensemble"}) {
    const fs::path cfg = p.dir / fmt::format("eval_{}.ini", source);
    write_file(cfg, slurp(p.config) + fmt::format("\n[evaluate]\nsource = {}\n", source));
    const fs::path out = p.dir / fmt::format("eval_{}", source);
    REQUIRE(run_cmd("evaluate", cfg, out) == 0);
    for (const char* f : {"metrics.tsv", "confusion.tsv", "roc.tsv", "pr.tsv", "predictions.tsv"}) {
      CHECK(fs::exists(out / f));
    }
    CHECK(slurp(out / "metrics.tsv").find("accuracy\t") != std::string::npos);
    REQUIRE(run_cmd("evaluate", cfg, out / "again") == 0);
    CHECK(slurp(out / "predictions.tsv") == slurp(out / "again" / "predictions.tsv"));
  }

  SUBCASE("missing model artifact") {
    write_file(p.dir / "nomodel.ini",
               slurp(p.config) + "\n[evaluate]\nsource = model\n");
    const std::string text = slurp(p.dir / "nomodel.ini");
    write_file(p.dir / "nomodel.ini",
               text.substr(0, text.find("path = train")) + "path = gone.bstk" +
                   text.substr(text.find("\n", text.find("path = train"))));
    CHECK(run_cmd("evaluate", p.dir / "nomodel.ini", p.dir / "x") == 2);
  }

  SUBCASE("identity augmentation gives identical rows") {
    write_file(p.dir / "identity.ini",
               slurp(p.config) +
                   "\n[augmentation]\nrotation = 0\nzoom_lo = 1\nzoom_hi = 1\n"
                   "brightness_lo = 1\nbrightness_hi = 1\n");
    const auto rows = robustness_rows(RunConfig::load(p.dir / "identity.ini"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].condition == "No augmentation");
    CHECK(rows[1].condition == "Rotation+Zoom");
    CHECK(rows[2].condition == "Rotation+Zoom+Brightness");
    for (const auto& r : rows) {
      CHECK(r.metrics.accuracy == rows[0].metrics.accuracy);
      CHECK(r.metrics.weighted_precision == rows[0].metrics.weighted_precision);
      CHECK(r.metrics.weighted_recall == rows[0].metrics.weighted_recall);
      CHECK(r.metrics.weighted_f1 == rows[0].metrics.weighted_f1);
    }
    REQUIRE(run_cmd("robustness", p.dir / "identity.ini", p.dir / "rob") == 0);
    std::istringstream in(slurp(p.dir / "rob" / "robustness.tsv"));
    std::string header, a, b, c;
    std::getline(in, header);
    std::getline(in, a);
    std::getline(in, b);
    std::getline(in, c);
    CHECK(a.substr(a.find('\t')) == b.substr(b.find('\t')));
    CHECK(a.substr(a.find('\t')) == c.substr(c.find('\t')));
  }
}

TEST_CASE("sensory commands") {
  const fs::path dir = scratch("sensory");
  const std::string table = BERRYSTACK_TEST_DATA "/sensory_panel.tsv";
  write_file(dir / "run.ini",
             fmt::format("[run]\nseed = 1\n[evaluate]\nsource = sensory\n[sensory]\ntable = {}\n", table));
  REQUIRE(run_cmd("evaluate", dir / "run.ini", dir / "eval") == 0);
  const std::string report = slurp(dir / "eval" / "sensory_report.tsv");
  CHECK(report.find("7DE558\t0\t1\t96.85\tDISAGREE") != std::string::npos);
  CHECK(report.find("165B41\t1\t1\t99.99\tagree") != std::string::npos);
  CHECK(report.find("# agreement 7/10") != std::string::npos);

  REQUIRE(run_cmd("correlate", dir / "run.ini", dir / "corr") == 0);
  const std::string corr = slurp(dir / "corr" / "correlation.tsv");
  CHECK(corr.rfind("variable\tmass", 0) == 0);

  // Joining machine confidences by berry id replaces the table's column.
  std::string preds = "berry_id\tlabel\tconfidence\tpredicted\n";
  for (const char* id : {"3D9262", "976122", "F3B65F", "061AE0", "7DE558", "A2761F", "8B49E5",
                         "165B41", "FF9EA0", "E206D2"}) {
    preds += fmt::format("{}\t0\t0.75\t1\n", id);
  }
  write_file(dir / "preds.tsv", preds);
  write_file(dir / "join.ini", fmt::format("[run]\nseed = 1\n[sensory]\ntable = {}\n"
                                           "predictions = preds.tsv\nvariables = texture, target, "
                                           "machine_confidence\n", table));
  REQUIRE(run_cmd("correlate", dir / "join.ini", dir / "join") == 0);
  CHECK(slurp(dir / "join" / "sensory_report.tsv").find("3D9262\t1\t1\t75.00\tagree") !=
        std::string::npos);
  CHECK(slurp(dir / "join" / "correlation.tsv").find("NA") != std::string::npos);

  write_file(dir / "preds.tsv", "berry_id\tconfidence\n3D9262\t0.5\n");
  CHECK(run_cmd("correlate", dir / "join.ini", dir / "join2") == 3);
}
