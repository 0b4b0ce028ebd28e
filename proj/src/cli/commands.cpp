#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "berrystack/cli.hpp"
#include "berrystack/errors.hpp"
#include "berrystack/image.hpp"
#include "berrystack/io_util.hpp"
#include "berrystack/spectral.hpp"
#include "berrystack/synth.hpp"

namespace berrystack::cli {

namespace fs = std::filesystem;

namespace {

using Outputs = std::vector<fs::path>;

bool quiet = false;

template <typename... Args>
void say(fmt::format_string<Args...> f, Args&&... args) {
  if (!quiet) fmt::print(f, std::forward<Args>(args)...);
}

std::vector<std::string> list_of(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& tok : io::split(text, ',')) {
    const std::string t = io::trim(tok);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

std::size_t positive(const RunConfig& c, const std::string& section, const std::string& key,
                     long long fallback) {
  const long long v = c.integer_or(section, key, fallback);
  if (v <= 0) throw ConfigError(fmt::format("[{}] {} must be positive", section, key));
  return static_cast<std::size_t>(v);
}

fs::path emit(Outputs& outs, const fs::path& path, const std::string& content) {
  io::write_atomic(path, content);
  outs.push_back(path);
  return path;
}

data::LabeledDataset load_split(const RunConfig& c, const std::string& key) {
  return data::load_prepared(c.input_path("data", key));
}

// --- synth -----------------------------------------------------------------

Outputs cmd_synth(const RunConfig& c) {
  Outputs outs;
  const fs::path out = c.out_dir();
  const std::string kind = c.text_or("synth", "kind", "bispectral");
  synth::BispectralSpec spec;
  spec.samples = positive(c, "synth", "samples", 400);
  spec.unripe_fraction = c.number_or("synth", "unripe_fraction", spec.unripe_fraction);
  spec.noise = c.number_or("synth", "noise", spec.noise);
  spec.seed = c.seed();
  spec.validate();

  if (kind == "bispectral") {
    outs.push_back(data::save_prepared(synth::bispectral_dataset(spec), out, "all"));
  } else if (kind == "stereo") {
    const auto caps = synth::stereo_captures(spec, positive(c, "synth", "side", 48));
    std::vector<data::ManifestRow> rows;
    std::string boxes = "berry_id\tx\ty\twidth\theight\n";
    for (const auto& cap : caps) {
      const std::string rel = "frames/" + cap.frame.berry_id + ".pgm";
      write_pgm(cap.frame.pixels, out / rel);
      rows.push_back({cap.frame.berry_id, data::Farm::synthetic, cap.label, rel, "-"});
      boxes += fmt::format("{}\t{}\t{}\t{}\t{}\n", cap.frame.berry_id, cap.bbox.x, cap.bbox.y,
                           cap.bbox.width, cap.bbox.height);
    }
    data::write_manifest(rows, out / "frames.tsv");
    outs.push_back(out / "frames.tsv");
    emit(outs, out / "bboxes.tsv", boxes);
  } else if (kind == "spectral") {
    const auto fx = synth::spectral_fixture(c.seed(), positive(c, "synth", "width", 50),
                                            positive(c, "synth", "height", 20),
                                            c.number_or("synth", "noise", 0.005));
    for (const auto& [name, cube] : {std::pair{"raw", &fx.raw}, std::pair{"white", &fx.white},
                                     std::pair{"dark", &fx.dark}}) {
      const fs::path hdr = out / fmt::format("{}.hdr", name);
      const fs::path bin = out / fmt::format("{}.bin", name);
      spectral::save_cube(*cube, hdr, bin);
      outs.push_back(hdr);
      outs.push_back(bin);
    }
    for (std::size_t cls = 0; cls < fx.masks.size(); ++cls) {
      const fs::path p = out / fmt::format("mask_{}.pgm", cls);
      spectral::save_mask(fx.masks[cls], p);
      outs.push_back(p);
    }
  } else {
    throw ConfigError(fmt::format("[synth] kind '{}' is not bispectral, stereo or spectral", kind));
  }
  return outs;
}

// --- select-wavelengths ----------------------------------------------------

Outputs cmd_select_wavelengths(const RunConfig& c) {
  Outputs outs;
  auto cube = [&](const std::string& name) {
    return spectral::load_cube(c.input_path("spectral", name + "_header"),
                               c.input_path("spectral", name + "_data"));
  };
  const auto reflectance = spectral::calibrate(cube("raw"), cube("white"), cube("dark"));

  std::vector<spectral::ClassSpectrum> spectra;
  for (int cls = 0; cls <= 4; ++cls) {
    const std::string key = fmt::format("mask_{}", cls);
    if (!c.has("spectral", key)) throw ConfigError(fmt::format("missing [spectral] {}", key));
    const auto mask = spectral::load_mask(c.input_path("spectral", key));
    spectra.push_back(spectral::normalize_spectrum(spectral::mean_spectrum(reflectance, mask, cls)));
  }

  spectral::WavelengthRange vis = spectral::kDefaultVisible;
  spectral::WavelengthRange nir = spectral::kDefaultNir;
  vis.lo = c.number_or("spectral", "visible_lo", vis.lo);
  vis.hi = c.number_or("spectral", "visible_hi", vis.hi);
  nir.lo = c.number_or("spectral", "nir_lo", nir.lo);
  nir.hi = c.number_or("spectral", "nir_hi", nir.hi);
  const auto pair = spectral::select_wavelengths(spectra, vis, nir);

  const auto sep = spectral::class_separation(spectra, spectral::kNearRipe, spectral::kRipe);
  std::string table = "wavelength_nm\tclass_0\tclass_1\tclass_2\tclass_3\tclass_4\tseparation_2_3\n";
  for (std::size_t b = 0; b < reflectance.bands(); ++b) {
    table += fmt::format("{}", reflectance.wavelengths[b]);
    for (const auto& s : spectra) table += fmt::format("\t{:.6f}", s.values[b]);
    table += fmt::format("\t{:.6f}\n", sep[b]);
  }
  emit(outs, c.out_dir() / "spectra.tsv", table);
  emit(outs, c.out_dir() / "wavelengths.tsv",
       fmt::format("band\twavelength_nm\nvisible\t{}\nnir\t{}\n", pair.visible_nm, pair.nir_nm));
  say("selected wavelengths: visible {} nm, NIR {} nm\n", pair.visible_nm, pair.nir_nm);
  return outs;
}

// --- prepare ---------------------------------------------------------------

std::map<std::string, data::BBox> read_bboxes(const fs::path& path) {
  std::map<std::string, data::BBox> out;
  std::istringstream in(io::read_text(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || io::trim(line).empty()) continue;
    const auto cols = io::split(line, '\t');
    if (cols.size() != 5) {
      throw FormatError(fmt::format("{}:{}: expected berry_id x y width height", path.string(),
                                    line_no));
    }
    try {
      out[io::trim(cols[0])] = data::BBox{std::stoul(cols[1]), std::stoul(cols[2]),
                                          std::stoul(cols[3]), std::stoul(cols[4])};
    } catch (const std::exception&) {
      throw FormatError(fmt::format("{}:{}: malformed box", path.string(), line_no));
    }
  }
  return out;
}

data::LabeledDataset prepare_from_manifest(const RunConfig& c) {
  const fs::path manifest = c.input_path("data", "manifest");
  if (c.flag_or("data", "prepared", false)) return data::load_prepared(manifest);

  std::map<std::string, data::BBox> boxes;
  if (c.has("data", "bboxes")) boxes = read_bboxes(c.input_path("data", "bboxes"));
  const fs::path base = manifest.parent_path();
  data::LabeledDataset ds;
  for (const auto& row : data::read_manifest(manifest)) {
    Image b700, b770;
    if (row.path_770 == "-") {
      const fs::path frame_path = base / row.path_700;
      std::pair<Gray8, Gray8> halves;
      try {
        halves = data::split_stereo({read_pgm(frame_path), row.berry_id});
      } catch (const FormatError& e) {
        // A malformed capture is an input-selection problem, not corrupt data.
        throw ArgumentError(fmt::format("{}: {}", frame_path.string(), e.what()));
      }
      b700 = to_image(halves.first);
      b770 = to_image(halves.second);
    } else {
      b700 = to_image(read_pgm(base / row.path_700));
      b770 = to_image(read_pgm(base / row.path_770));
    }
    data::BBox box{0, 0, b700.width, b700.height};
    if (auto it = boxes.find(row.berry_id); it != boxes.end()) box = it->second;
    ds.samples.push_back(
        data::prepare_sample(b700, b770, box, row.label, row.berry_id, row.farm));
  }
  if (ds.empty()) throw FormatError(fmt::format("manifest '{}' lists no samples", manifest.string()));
  return ds;
}

Outputs cmd_prepare(const RunConfig& c) {
  Outputs outs;
  const auto ds = prepare_from_manifest(c);
  const std::size_t minimum = positive(c, "data", "min_per_class", 5);
  const auto counts = ds.class_counts();
  for (std::size_t cls = 0; cls < 2; ++cls) {
    if (counts[cls] < minimum) {
      throw ConfigError(fmt::format("class {} has {} samples, below the minimum of {}", cls,
                                    counts[cls], minimum));
    }
  }
  data::SplitRatios ratios;
  ratios.train = c.number_or("data", "train_ratio", ratios.train);
  ratios.validation = c.number_or("data", "validation_ratio", ratios.validation);
  const auto splits = data::stratified_split(ds, c.seed(), ratios);
  const auto oversampled = data::random_oversample(splits.train, c.seed());

  const fs::path out = c.out_dir();
  std::string summary = "split\tripe\tunripe\ttotal\n";
  for (const auto& [name, split] :
       {std::pair{"train", &splits.train}, std::pair{"validation", &splits.validation},
        std::pair{"test", &splits.test}, std::pair{"train_oversampled", &oversampled}}) {
    outs.push_back(data::save_prepared(*split, out, name));
    const auto cc = split->class_counts();
    summary += fmt::format("{}\t{}\t{}\t{}\n", name, cc[0], cc[1], split->size());
  }
  emit(outs, out / "class_counts.tsv", summary);
  say("{}", summary);
  return outs;
}

// --- train / tune / train-ensemble -----------------------------------------

std::string history_table(const std::vector<nn::EpochRecord>& history, int best_epoch) {
  std::string out = "epoch\ttrain_loss\ttrain_accuracy\tval_loss\tval_accuracy\tbest\n";
  for (const auto& h : history) {
    out += fmt::format("{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{}\n", h.epoch, h.train_loss,
                       h.train_accuracy, h.val_loss, h.val_accuracy,
                       h.epoch == best_epoch ? "*" : "");
  }
  return out;
}

Outputs cmd_train(const RunConfig& c) {
  Outputs outs;
  const auto extractor = make_extractor(c);
  const auto cfg = model_config(c);
  const auto train = load_split(c, "train");
  const auto val = load_split(c, "validation");
  const auto trained = model::train_model(train, val, cfg, extractor);
  fs::create_directories(c.out_dir());
  const fs::path path = c.out_dir() / "model.bstk";
  model::save_model(trained, path);
  outs.push_back(path);
  outs.push_back(fs::path(path.string() + ".cfg"));
  emit(outs, c.out_dir() / "history.tsv", history_table(trained.history, trained.best_epoch));
  say("trained {} (best epoch {})\n", cfg.fc.label(), trained.best_epoch);
  return outs;
}

Outputs cmd_tune(const RunConfig& c) {
  Outputs outs;
  const auto extractor = make_extractor(c);
  auto pool = load_split(c, "train");
  if (c.has("data", "validation")) {
    for (auto& s : load_split(c, "validation").samples) pool.samples.push_back(std::move(s));
  }
  const auto features = model::extract_dataset(pool, *extractor);
  const std::size_t k = positive(c, "tuning", "k", 10);
  const auto result = tuning::coordinate_grid_search(grid_spec(c), model_config(c), features, k,
                                                     c.seed(), extractor);
  emit(outs, c.out_dir() / "tune_report.tsv", tuning::format_tune_report(result));
  const auto& f = result.final_config;
  emit(outs, c.out_dir() / "best_model.ini",
       fmt::format("[model]\nfc = {}x{}\noptimizer = {}\nlearning_rate = {}\nbatch_size = {}\n"
                   "epochs = {}\n",
                   f.fc.n1, f.fc.n2, nn::to_string(f.optimizer.kind), f.optimizer.learning_rate,
                   f.schedule.batch_size, f.schedule.epochs));
  say("{} candidate evaluations, chose {} / {} / batch {} / {} epochs\n",
             result.evaluations, f.fc.label(), nn::to_string(f.optimizer.kind),
             f.schedule.batch_size, f.schedule.epochs);
  return outs;
}

Outputs cmd_train_ensemble(const RunConfig& c) {
  Outputs outs;
  const auto extractor = make_extractor(c);
  const auto train = model::extract_dataset(load_split(c, "train"), *extractor);
  const auto val = model::extract_dataset(load_split(c, "validation"), *extractor);
  const auto ens = ensemble::train_ensemble(train, val, ensemble_config(c), extractor);
  const fs::path dir = c.out_dir() / "ensemble";
  ensemble::save_ensemble(ens, dir);
  outs.push_back(dir);
  std::string coef = "term\tvalue\n";
  coef += fmt::format("beta0\t{:.9g}\n", ens.meta.beta0);
  for (std::size_t i = 0; i < ens.meta.beta1.size(); ++i) {
    coef += fmt::format("beta1_{}\t{:.9g}\n", i + 1, ens.meta.beta1[i]);
  }
  coef += fmt::format("# iterations {} converged {} final_nll {:.9g}\n", ens.meta.iterations,
                      ens.meta.converged ? "yes" : "no", ens.meta.final_nll);
  emit(outs, c.out_dir() / "meta_learner.tsv", coef);
  say("ensemble of {} learners, meta-learner {} after {} iterations\n",
             ens.learners.size(), ens.meta.converged ? "converged" : "stopped",
             ens.meta.iterations);
  return outs;
}

// --- evaluate / robustness / correlate -------------------------------------

using Predictor = std::function<std::vector<double>(const model::FeatureSet&)>;

struct LoadedPredictor {
  model::ExtractorPtr extractor;
  Predictor predict;
};

LoadedPredictor load_predictor(const RunConfig& c) {
  const std::string source = c.text_or("evaluate", "source", "ensemble");
  LoadedPredictor lp;
  if (source == "model") {
    const fs::path path = c.input_path("model", "path");
    lp.extractor = make_extractor(c);
    auto m = std::make_shared<model::TrainedModel>(model::load_model(path, lp.extractor));
    lp.predict = [m](const model::FeatureSet& fs) { return model::forward_features(*m, fs.x); };
  } else if (source == "ensemble") {
    const fs::path dir = c.input_path("ensemble", "path");
    lp.extractor = make_extractor(c);
    auto e = std::make_shared<ensemble::EnsembleModel>(ensemble::load_ensemble(dir, lp.extractor));
    lp.predict = [e](const model::FeatureSet& fs) { return ensemble::predict_ensemble(*e, fs); };
  } else {
    throw ConfigError(fmt::format("[evaluate] source '{}' is not model, ensemble or sensory",
                                  source));
  }
  return lp;
}

evalx::MetricsReport metrics_of(const std::vector<double>& conf, const std::vector<double>& y) {
  std::vector<int> pred, truth;
  for (double p : conf) pred.push_back(model::classify(p));
  for (double v : y) truth.push_back(static_cast<int>(v));
  return evalx::weighted_metrics(evalx::confusion(pred, truth));
}

void write_evaluation(const RunConfig& c, Outputs& outs, const std::vector<std::string>& ids,
                      const std::vector<double>& conf, const std::vector<double>& y) {
  std::vector<int> pred, truth;
  for (double p : conf) pred.push_back(model::classify(p));
  for (double v : y) truth.push_back(static_cast<int>(v));
  const auto cm = evalx::confusion(pred, truth);
  const auto m = evalx::weighted_metrics(cm);
  const fs::path out = c.out_dir();

  std::string metrics = "metric\tvalue\n";
  metrics += fmt::format("accuracy\t{:.6f}\nweighted_precision\t{:.6f}\n", m.accuracy,
                         m.weighted_precision);
  metrics += fmt::format("weighted_recall\t{:.6f}\nweighted_f1\t{:.6f}\n", m.weighted_recall,
                         m.weighted_f1);
  const bool both_classes = std::count(truth.begin(), truth.end(), 1) > 0 &&
                            std::count(truth.begin(), truth.end(), 0) > 0;
  if (both_classes) {
    const auto roc = evalx::roc_auc(conf, y);
    metrics += fmt::format("roc_auc\t{:.6f}\n", roc.auc);
    emit(outs, out / "roc.tsv", evalx::format_curve(roc));
  }
  if (std::count(truth.begin(), truth.end(), 1) > 0) {
    emit(outs, out / "pr.tsv", evalx::format_curve(evalx::pr_curve(conf, y)));
  }
  for (const auto& w : m.warnings) metrics += "# warning: " + w + "\n";
  emit(outs, out / "metrics.tsv", metrics);
  emit(outs, out / "confusion.tsv",
       fmt::format("\tpredicted_ripe\tpredicted_unripe\nactual_ripe\t{}\t{}\n"
                   "actual_unripe\t{}\t{}\n",
                   cm.tn, cm.fp, cm.fn, cm.tp));
  std::string preds = "berry_id\tlabel\tconfidence\tpredicted\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    preds += fmt::format("{}\t{}\t{:.6f}\t{}\n", ids[i], truth[i], conf[i], pred[i]);
  }
  emit(outs, out / "predictions.tsv", preds);
  say("accuracy {:.4f}  precision {:.4f}  recall {:.4f}  f1 {:.4f}\n", m.accuracy,
             m.weighted_precision, m.weighted_recall, m.weighted_f1);
}

Outputs cmd_evaluate(const RunConfig& c) {
  Outputs outs;
  std::vector<std::string> ids;
  std::vector<double> conf, y;
  if (c.text_or("evaluate", "source", "ensemble") == "sensory") {
    const auto records = evalx::load_sensory(c.input_path("sensory", "table"));
    for (const auto& r : records) {
      ids.push_back(r.berry_id);
      conf.push_back(r.machine_confidence_pct / 100.0);
      y.push_back(r.target);
    }
    emit(outs, c.out_dir() / "sensory_report.tsv",
         evalx::format_sensory_report(evalx::sensory_report(records)));
  } else {
    const auto lp = load_predictor(c);
    const auto test = load_split(c, "test");
    conf = lp.predict(model::extract_dataset(test, *lp.extractor));
    y = test.labels();
    for (const auto& s : test.samples) ids.push_back(s.berry_id);
  }
  write_evaluation(c, outs, ids, conf, y);
  return outs;
}

std::string robustness_table(const std::vector<RobustnessRow>& rows) {
  std::string out = "condition\taccuracy\tweighted_precision\tweighted_recall\tweighted_f1\n";
  for (const auto& r : rows) {
    // Full precision so identical rows compare exactly.
    out += fmt::format("{}\t{:.17g}\t{:.17g}\t{:.17g}\t{:.17g}\n", r.condition, r.metrics.accuracy,
                       r.metrics.weighted_precision, r.metrics.weighted_recall,
                       r.metrics.weighted_f1);
  }
  return out;
}

Outputs cmd_robustness(const RunConfig& c) {
  Outputs outs;
  const auto rows = robustness_rows(c);
  emit(outs, c.out_dir() / "robustness.tsv", robustness_table(rows));
  for (const auto& r : rows) say("{:<26} {:.4f}\n", r.condition, r.metrics.accuracy);
  return outs;
}

std::map<std::string, double> read_predictions(const fs::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::getline(in, line);
  const auto header = io::split(line, '\t');
  const auto id_col = std::find(header.begin(), header.end(), "berry_id") - header.begin();
  const auto conf_col = std::find(header.begin(), header.end(), "confidence") - header.begin();
  if (id_col == static_cast<long>(header.size()) || conf_col == static_cast<long>(header.size())) {
    throw FormatError(fmt::format("{}: needs berry_id and confidence columns", path.string()));
  }
  std::map<std::string, double> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty()) continue;
    const auto cols = io::split(line, '\t');
    if (cols.size() != header.size()) {
      throw FormatError(fmt::format("{}:{}: wrong column count", path.string(), line_no));
    }
    try {
      out[io::trim(cols[id_col])] = std::stod(cols[conf_col]);
    } catch (const std::exception&) {
      throw FormatError(fmt::format("{}:{}: malformed confidence", path.string(), line_no));
    }
  }
  return out;
}

Outputs cmd_correlate(const RunConfig& c) {
  Outputs outs;
  auto records = evalx::load_sensory(c.input_path("sensory", "table"));
  if (c.has("sensory", "predictions")) {
    const auto preds = read_predictions(c.input_path("sensory", "predictions"));
    for (auto& r : records) {
      auto it = preds.find(r.berry_id);
      if (it == preds.end()) {
        throw FormatError(fmt::format("no prediction for berry '{}'", r.berry_id));
      }
      r.machine_confidence_pct = 100.0 * it->second;
    }
  }
  const auto variables = c.has("sensory", "variables") ? list_of(c.text("sensory", "variables"))
                                                       : evalx::default_sensory_variables();
  const auto m = evalx::pearson_matrix(records, variables);
  emit(outs, c.out_dir() / "correlation.tsv", evalx::format_correlation(m));
  emit(outs, c.out_dir() / "sensory_report.tsv",
       evalx::format_sensory_report(evalx::sensory_report(records)));
  return outs;
}

using Command = Outputs (*)(const RunConfig&);

const std::vector<std::pair<std::string, Command>>& commands() {
  static const std::vector<std::pair<std::string, Command>> table = {
      {"synth", cmd_synth},
      {"select-wavelengths", cmd_select_wavelengths},
      {"prepare", cmd_prepare},
      {"train", cmd_train},
      {"tune", cmd_tune},
      {"train-ensemble", cmd_train_ensemble},
      {"evaluate", cmd_evaluate},
      {"robustness", cmd_robustness},
      {"correlate", cmd_correlate},
  };
  return table;
}

}  // namespace

// ---------------------------------------------------------------------------

model::ExtractorPtr make_extractor(const RunConfig& c) {
  const std::string kind = c.text_or("extractor", "kind", "surrogate");
  if (kind == "surrogate") {
    const std::size_t dim = positive(c, "extractor", "dim", 512);
    const auto seed = static_cast<std::uint64_t>(c.integer_or("extractor", "seed", 0));
    return std::make_shared<const model::FeatureExtractor>(
        model::FeatureExtractor::surrogate(dim, seed));
  }
  if (kind == "file") {
    return std::make_shared<const model::FeatureExtractor>(
        model::FeatureExtractor::load(c.input_path("extractor", "path")));
  }
  throw ConfigError(fmt::format("[extractor] kind '{}' is not surrogate or file", kind));
}

model::ModelConfig model_config(const RunConfig& c) {
  model::ModelConfig m;
  if (c.has("model", "fc")) m.fc = model::FcSpec::parse(c.text("model", "fc"));
  if (c.has("model", "optimizer")) {
    m.optimizer = nn::OptimizerSettings::defaults_for(
        nn::optimizer_from_string(c.text("model", "optimizer")));
  }
  m.optimizer.learning_rate = c.number_or("model", "learning_rate", m.optimizer.learning_rate);
  m.optimizer.momentum = c.number_or("model", "momentum", m.optimizer.momentum);
  m.schedule.batch_size = static_cast<int>(positive(c, "model", "batch_size", m.schedule.batch_size));
  m.schedule.epochs = static_cast<int>(positive(c, "model", "epochs", m.schedule.epochs));
  m.schedule.patience = static_cast<int>(positive(c, "model", "patience", m.schedule.patience));
  m.seed = c.seed();
  try {
    m.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(fmt::format("[model] {}", e.what()));
  }
  return m;
}

ensemble::EnsembleConfig ensemble_config(const RunConfig& c) {
  ensemble::EnsembleConfig e;
  e.base = model_config(c);
  e.learners = static_cast<std::size_t>(c.integer_or("ensemble", "learners", 5));
  e.ridge = c.number_or("ensemble", "ridge", e.ridge);
  e.seed = c.seed();
  e.validate();
  return e;
}

tuning::GridSpec grid_spec(const RunConfig& c) {
  tuning::GridSpec g = tuning::GridSpec::default_grid();
  if (c.has("tuning", "fc")) {
    g.fc.clear();
    for (const auto& t : list_of(c.text("tuning", "fc"))) g.fc.push_back(model::FcSpec::parse(t));
  }
  if (c.has("tuning", "optimizers")) {
    g.optimizers.clear();
    for (const auto& t : list_of(c.text("tuning", "optimizers"))) {
      g.optimizers.push_back(nn::optimizer_from_string(t));
    }
  }
  auto ints = [&](const std::string& key, std::vector<int>& into) {
    if (!c.has("tuning", key)) return;
    into.clear();
    for (const auto& t : list_of(c.text("tuning", key))) {
      try {
        into.push_back(std::stoi(t));
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("[tuning] {}: '{}' is not an integer", key, t));
      }
      if (into.back() <= 0) throw ConfigError(fmt::format("[tuning] {} must be positive", key));
    }
  };
  ints("batch_sizes", g.batch_sizes);
  ints("epochs", g.epochs);
  g.metric = tuning::selection_metric_from_string(c.text_or("tuning", "metric", "f1"));
  try {
    g.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(fmt::format("[tuning] {}", e.what()));
  }
  return g;
}

data::AugmentationSpec augmentation_spec(const RunConfig& c, bool brightness) {
  auto spec = data::AugmentationSpec::rotation_zoom_brightness(c.seed());
  spec.max_rotation_deg = c.number_or("augmentation", "rotation", spec.max_rotation_deg);
  spec.zoom_range = {c.number_or("augmentation", "zoom_lo", spec.zoom_range[0]),
                     c.number_or("augmentation", "zoom_hi", spec.zoom_range[1])};
  spec.brightness_range = {c.number_or("augmentation", "brightness_lo", spec.brightness_range[0]),
                           c.number_or("augmentation", "brightness_hi", spec.brightness_range[1])};
  if (!brightness) spec.brightness_range = {1.0, 1.0};
  try {
    spec.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(fmt::format("[augmentation] {}", e.what()));
  }
  return spec;
}

std::vector<RobustnessRow> robustness_rows(const RunConfig& c) {
  const auto lp = load_predictor(c);
  const auto test = load_split(c, "test");
  auto score = [&](const data::LabeledDataset& ds) {
    return metrics_of(lp.predict(model::extract_dataset(ds, *lp.extractor)), ds.labels());
  };
  std::vector<RobustnessRow> rows;
  rows.push_back({"No augmentation", score(test)});
  rows.push_back({"Rotation+Zoom", score(data::augment_dataset(test, augmentation_spec(c, false)))});
  rows.push_back({"Rotation+Zoom+Brightness",
                  score(data::augment_dataset(test, augmentation_spec(c, true)))});
  return rows;
}

void set_quiet(bool q) { quiet = q; }

std::vector<std::string> command_names() {
  std::vector<std::string> out;
  for (const auto& [name, fn] : commands()) out.push_back(name);
  return out;
}

std::vector<fs::path> run_command(const std::string& name, const RunConfig& config) {
  for (const auto& [n, fn] : commands()) {
    if (n == name) {
      fs::create_directories(config.out_dir());
      return fn(config);
    }
  }
  throw ConfigError(fmt::format("unknown command '{}'", name));
}

}  // namespace berrystack::cli
