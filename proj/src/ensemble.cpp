#include "berrystack/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/io_util.hpp"

namespace berrystack::ensemble {

namespace fs = std::filesystem;

void EnsembleConfig::validate() const {
  if (learners < 2) throw ConfigError("an ensemble needs at least 2 learners");
  if (!(ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
  base.validate();
}

std::string StackedFeatures::digest() const {
  std::vector<std::uint8_t> bytes;
  io::put_u32(bytes, static_cast<std::uint32_t>(matrix.rows()));
  io::put_u32(bytes, static_cast<std::uint32_t>(matrix.cols()));
  for (double v : matrix.values()) io::put_f32(bytes, static_cast<float>(v));
  for (double v : labels) io::put_f32(bytes, static_cast<float>(v));
  return io::hex_digest(io::fnv1a(bytes));
}

std::vector<model::TrainedModel> train_base_learners(const model::FeatureSet& train,
                                                     const model::FeatureSet& val,
                                                     const EnsembleConfig& config,
                                                     model::ExtractorPtr extractor) {
  config.validate();
  const std::size_t b = config.learners;
  std::vector<model::TrainedModel> learners(b);
  std::vector<std::exception_ptr> failures(b);
  auto train_one = [&](std::size_t i) {
    try {
      const std::uint64_t k = i + 1;
      auto subset = train.subset(data::bootstrap_indices(train.size(), config.seed + k));
      model::ModelConfig mc = config.base;
      mc.seed = config.base.seed + k;
      learners[i] = model::train_head(subset, val, mc, extractor);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  };
#pragma omp parallel for schedule(dynamic) if (config.parallel)
  for (std::size_t i = 0; i < b; ++i) train_one(i);

  for (std::size_t i = 0; i < b; ++i) {
    if (!failures[i]) continue;
    try {
      std::rethrow_exception(failures[i]);
    } catch (const NumericError& e) {
      throw TrainingError(fmt::format("base learner {}: {}", i + 1, e.what()));
    } catch (const ArgumentError& e) {
      throw ArgumentError(fmt::format("base learner {}: {}", i + 1, e.what()));
    }
  }
  return learners;
}

StackedFeatures stack_predictions(const std::vector<model::TrainedModel>& learners,
                                  const model::FeatureSet& samples) {
  if (learners.empty()) throw ArgumentError("no learners to stack");
  if (samples.size() == 0) throw ArgumentError("no samples to stack");
  StackedFeatures s{Tensor({samples.size(), learners.size()}), samples.y};
  for (std::size_t j = 0; j < learners.size(); ++j) {
    const auto p = model::forward_features(learners[j], samples.x);
    for (std::size_t i = 0; i < p.size(); ++i) s.matrix.at(i, j) = p[i];
  }
  return s;
}

namespace {

double sigmoid(double z) {
  // Stable for large |z|.
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Sums over learners are taken in sorted order, so permuting the learners
// permutes the fit exactly instead of perturbing its rounding.
double sorted_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

struct MetaEval {
  double nll = 0.0;
  double objective = 0.0;
};

// Parameters: theta[0] = beta0, theta[1..B] = beta1.
MetaEval evaluate(const StackedFeatures& s, const std::vector<double>& theta, double ridge,
                  std::vector<double>* grad) {
  const std::size_t n = s.matrix.rows(), b = s.matrix.cols();
  MetaEval ev;
  if (grad) grad->assign(b + 1, 0.0);
  std::vector<double> terms(b);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = s.matrix.row(i);
    for (std::size_t j = 0; j < b; ++j) terms[j] = theta[j + 1] * row[j];
    const double z = theta[0] + sorted_sum(terms);
    // -[y log p + (1-y) log(1-p)] = softplus(z) - y z
    ev.nll += softplus(z) - s.labels[i] * z;
    if (grad) {
      const double r = sigmoid(z) - s.labels[i];
      (*grad)[0] += r;
      for (std::size_t j = 0; j < b; ++j) (*grad)[j + 1] += r * row[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  ev.nll *= inv_n;
  for (std::size_t j = 0; j < b; ++j) terms[j] = theta[j + 1] * theta[j + 1];
  const double penalty = sorted_sum(terms);
  ev.objective = ev.nll + 0.5 * ridge * penalty;
  if (grad) {
    for (auto& g : *grad) g *= inv_n;
    for (std::size_t j = 1; j <= b; ++j) (*grad)[j] += ridge * theta[j];
  }
  return ev;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

MetaLearner fit_meta(const StackedFeatures& stacked, const MetaFitOptions& options) {
  const std::size_t n = stacked.matrix.rows(), b = stacked.matrix.cols();
  if (n == 0 || b == 0 || stacked.labels.size() != n) {
    throw ArgumentError("stack must have rows, columns and one label per row");
  }
  bool has0 = false, has1 = false;
  for (double y : stacked.labels) {
    if (y == 0.0) has0 = true;
    else if (y == 1.0) has1 = true;
    else throw ArgumentError(fmt::format("stack label {} is not binary", y));
  }
  if (!has0 || !has1) throw ArgumentError("fit_meta needs both labels in the stack");
  if (!stacked.matrix.all_finite()) throw ArgumentError("stack holds non-finite values");

  std::vector<double> theta(b + 1, 0.0), grad, trial(b + 1), trial_grad;
  MetaEval cur = evaluate(stacked, theta, options.ridge, &grad);
  MetaLearner meta;
  double step = 1.0;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (max_abs(grad) < options.tolerance) {
      meta.converged = true;
      break;
    }
    std::vector<double> squares(grad.size() - 1);
    for (std::size_t j = 1; j < grad.size(); ++j) squares[j - 1] = grad[j] * grad[j];
    const double g2 = grad[0] * grad[0] + sorted_sum(squares);
    // Armijo backtracking. The step is never grown again: larger trial steps
    // zig-zag, and although the penalized objective still falls, the plain
    // NLL then rises on some iterations.
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      for (std::size_t j = 0; j <= b; ++j) trial[j] = theta[j] - step * grad[j];
      const MetaEval next = evaluate(stacked, trial, options.ridge, nullptr);
      if (next.objective <= cur.objective - 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further descent possible at double precision
    theta.swap(trial);
    cur = evaluate(stacked, theta, options.ridge, &grad);
    meta.nll_trace.push_back(cur.nll);
    meta.objective_trace.push_back(cur.objective);
    meta.iterations = it + 1;
  }
  if (!meta.converged && max_abs(grad) < options.tolerance) meta.converged = true;
  meta.beta0 = theta[0];
  meta.beta1.assign(theta.begin() + 1, theta.end());
  meta.final_nll = cur.nll;
  for (double t : theta) {
    if (!std::isfinite(t)) throw NumericError("meta-learner coefficients became non-finite");
  }
  return meta;
}

double predict_meta(const MetaLearner& meta, std::span<const double> row) {
  if (row.size() != meta.beta1.size()) {
    throw DimensionError(fmt::format("stack row has {} entries, meta-learner expects {}",
                                     row.size(), meta.beta1.size()));
  }
  std::vector<double> terms(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) terms[j] = meta.beta1[j] * row[j];
  return sigmoid(meta.beta0 + sorted_sum(terms));
}

EnsembleModel train_ensemble(const model::FeatureSet& train, const model::FeatureSet& val,
                             const EnsembleConfig& config, model::ExtractorPtr extractor) {
  EnsembleModel m;
  m.config = config;
  m.learners = train_base_learners(train, val, config, std::move(extractor));
  const auto stack = stack_predictions(m.learners, val);
  m.meta = fit_meta(stack, MetaFitOptions{config.ridge});
  m.stack_digest = stack.digest();
  return m;
}

std::vector<double> predict_ensemble(const EnsembleModel& model, const model::FeatureSet& samples,
                                     StackedFeatures* stack) {
  StackedFeatures s = stack_predictions(model.learners, samples);
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = predict_meta(model.meta, s.matrix.row(i));
  if (stack) *stack = std::move(s);
  return out;
}

double predict_ensemble(const EnsembleModel& model, const data::BispectralSample& sample) {
  if (model.learners.empty()) throw StateError("ensemble has no learners");
  data::LabeledDataset one;
  one.samples.push_back(sample);
  return predict_ensemble(model, model::extract_dataset(one, *model.learners.front().extractor))[0];
}

// ---------------------------------------------------------------------------

void save_ensemble(const EnsembleModel& model, const fs::path& dir) {
  if (model.learners.size() != model.meta.beta1.size()) {
    throw StateError("ensemble learners and meta coefficients disagree");
  }
  fs::create_directories(dir);
  for (std::size_t i = 0; i < model.learners.size(); ++i) {
    model::save_model(model.learners[i], dir / fmt::format("learner_{}.bstk", i + 1));
  }
  std::string beta1;
  for (std::size_t j = 0; j < model.meta.beta1.size(); ++j) {
    beta1 += fmt::format("{}{:.17g}", j ? "," : "", model.meta.beta1[j]);
  }
  io::write_atomic(dir / "meta.txt",
                   fmt::format("B = {}\nbeta0 = {:.17g}\nbeta1 = {}\nridge = {:.17g}\n"
                               "iterations = {}\nconverged = {}\nfinal_nll = {:.17g}\n"
                               "seed = {}\nvalidation_stack_digest = {}\n",
                               model.learners.size(), model.meta.beta0, beta1, model.config.ridge,
                               model.meta.iterations, model.meta.converged ? 1 : 0,
                               model.meta.final_nll, model.config.seed, model.stack_digest));
}

EnsembleModel load_ensemble(const fs::path& dir, model::ExtractorPtr extractor) {
  const fs::path meta_path = dir / "meta.txt";
  std::map<std::string, std::string> kv;
  std::istringstream in(io::read_text(meta_path));
  std::string line;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(fmt::format("{}: bad line '{}'", meta_path.string(), line));
    kv[io::trim(line.substr(0, eq))] = io::trim(line.substr(eq + 1));
  }
  auto get = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(fmt::format("{}: missing '{}'", meta_path.string(), key));
    return it->second;
  };
  EnsembleModel m;
  try {
    const std::size_t b = std::stoul(get("B"));
    m.meta.beta0 = std::stod(get("beta0"));
    for (const auto& tok : io::split(get("beta1"), ',')) m.meta.beta1.push_back(std::stod(tok));
    if (m.meta.beta1.size() != b) {
      throw FormatError(fmt::format("{}: B = {} but {} coefficients", meta_path.string(), b,
                                    m.meta.beta1.size()));
    }
    m.config.learners = b;
    m.config.ridge = std::stod(get("ridge"));
    m.config.seed = std::stoull(get("seed"));
    m.meta.iterations = std::stoi(get("iterations"));
    m.meta.converged = get("converged") == "1";
    m.meta.final_nll = std::stod(get("final_nll"));
  } catch (const std::logic_error&) {
    throw FormatError(fmt::format("{}: malformed value", meta_path.string()));
  }
  m.stack_digest = get("validation_stack_digest");
  for (std::size_t i = 0; i < m.config.learners; ++i) {
    m.learners.push_back(model::load_model(dir / fmt::format("learner_{}.bstk", i + 1), extractor));
  }
  m.config.base = m.learners.front().config;
  m.config.base.seed -= 1;  // learner i carries base seed + i
  for (const auto& l : m.learners) {
    if (!(l.config.fc == m.learners.front().config.fc)) {
      throw FormatError("ensemble learners do not share one architecture");
    }
  }
  return m;
}

}  // namespace berrystack::ensemble
