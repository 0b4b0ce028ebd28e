#include "berrystack/tuning.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/evalx.hpp"

namespace berrystack::tuning {

std::vector<std::size_t> FoldAssignment::members(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] == f) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldAssignment::complement(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold.size(); ++i)
    if (fold[i] != f) out.push_back(i);
  return out;
}

FoldAssignment stratified_kfold(const std::vector<double>& labels, std::size_t k,
                                std::uint64_t seed) {
  if (k < 2) throw ArgumentError("k-fold needs k >= 2");
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw ArgumentError(fmt::format("label {} is not binary", i));
    }
    by_class[labels[i] == 1.0 ? 1 : 0].push_back(i);
  }
  for (std::size_t c = 0; c < 2; ++c) {
    if (by_class[c].size() < k) {
      throw ArgumentError(fmt::format("class {} has {} samples, fewer than k = {}", c,
                                      by_class[c].size(), k));
    }
  }
  FoldAssignment fa{k, seed, std::vector<std::size_t>(labels.size(), 0)};
  std::mt19937_64 rng(seed);
  std::size_t next = 0;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i : idx) fa.fold[i] = next++ % k;
  }
  return fa;
}

MetricSummary MetricSummary::of(const std::vector<double>& values) {
  if (values.empty()) throw ArgumentError("no values to summarize");
  MetricSummary s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::string MetricSummary::cell() const { return fmt::format("{:.3f}±{:.3f}", mean, std); }

namespace {

struct FoldOutcome {
  double precision, recall, f1, train_accuracy, test_accuracy;
};

FoldOutcome run_fold(const model::ModelConfig& config, const model::FeatureSet& data,
                     const FoldAssignment& folds, std::size_t f, model::ExtractorPtr extractor) {
  const auto rest = folds.complement(f);
  // Early-stopping carve-out, per class.
  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i : rest) by_class[data.y[i] == 1.0 ? 1 : 0].push_back(i);
  std::mt19937_64 rng(folds.seed + 1000 * (f + 1));
  const std::size_t divisor = std::max<std::size_t>(folds.k - 1, 2);
  std::vector<std::size_t> train_rows, val_rows;
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_val = std::max<std::size_t>(1, idx.size() / divisor);
    if (n_val >= idx.size()) {
      throw ArgumentError(fmt::format("fold {}: too few samples for a validation carve-out", f));
    }
    val_rows.insert(val_rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_rows.insert(train_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  const model::FeatureSet base_train = data.subset(train_rows);
  const model::FeatureSet train =
      base_train.subset(data::oversample_indices(base_train.y, rng()));
  const model::FeatureSet val = data.subset(val_rows);
  const model::FeatureSet test = data.subset(folds.members(f));

  model::ModelConfig mc = config;
  mc.seed = config.seed + f;
  const auto trained = model::train_head(train, val, mc, std::move(extractor));

  auto labels_of = [](const std::vector<double>& p) {
    std::vector<int> out;
    for (double v : p) out.push_back(model::classify(v));
    return out;
  };
  std::vector<int> truth(test.y.begin(), test.y.end());
  const auto cm = evalx::confusion(labels_of(model::forward_features(trained, test.x)), truth);
  const auto m = evalx::weighted_metrics(cm);
  const auto p_train = model::forward_features(trained, train.x);
  return FoldOutcome{m.weighted_precision, m.weighted_recall, m.weighted_f1,
                     nn::threshold_accuracy(p_train, train.y), m.accuracy};
}

}  // namespace

CandidateMetrics evaluate_candidate(const model::ModelConfig& config, const model::FeatureSet& data,
                                    const FoldAssignment& folds, model::ExtractorPtr extractor) {
  if (folds.fold.size() != data.size()) {
    throw ArgumentError("fold assignment does not match the dataset size");
  }
  config.validate();
  const std::size_t k = folds.k;
  std::vector<FoldOutcome> outcomes(k);
  std::vector<std::exception_ptr> failures(k);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t f = 0; f < k; ++f) {
    try {
      outcomes[f] = run_fold(config, data, folds, f, extractor);
    } catch (...) {
      failures[f] = std::current_exception();
    }
  }
  for (std::size_t f = 0; f < k; ++f) {
    if (!failures[f]) continue;
    try {
      std::rethrow_exception(failures[f]);
    } catch (const NumericError& e) {
      throw TrainingError(fmt::format("fold {}: {}", f, e.what()));
    } catch (const ArgumentError& e) {
      throw ArgumentError(fmt::format("fold {}: {}", f, e.what()));
    }
  }
  auto collect = [&](double FoldOutcome::*field) {
    std::vector<double> v;
    for (const auto& o : outcomes) v.push_back(o.*field);
    return MetricSummary::of(v);
  };
  CandidateMetrics cm;
  cm.precision = collect(&FoldOutcome::precision);
  cm.recall = collect(&FoldOutcome::recall);
  cm.f1 = collect(&FoldOutcome::f1);
  cm.train_accuracy = collect(&FoldOutcome::train_accuracy);
  cm.test_accuracy = collect(&FoldOutcome::test_accuracy);
  cm.trainings = k;
  return cm;
}

SelectionMetric selection_metric_from_string(const std::string& name) {
  if (name == "precision") return SelectionMetric::precision;
  if (name == "f1") return SelectionMetric::f1;
  if (name == "accuracy") return SelectionMetric::accuracy;
  throw ConfigError(fmt::format("unknown selection metric '{}'", name));
}

void GridSpec::validate() const {
  if (fc.empty()) throw ArgumentError("grid axis 'fc' is empty");
  if (optimizers.empty()) throw ArgumentError("grid axis 'optimizer' is empty");
  if (batch_sizes.empty()) throw ArgumentError("grid axis 'batch_size' is empty");
  if (epochs.empty()) throw ArgumentError("grid axis 'epochs' is empty");
}

GridSpec GridSpec::default_grid() {
  GridSpec g;
  g.fc = {{256, 256}, {512, 512}, {1024, 1024}, {2048, 2048},
          {256, 256}, {512, 256}, {1024, 256}, {2048, 256}};
  g.optimizers = {nn::OptimizerKind::adam, nn::OptimizerKind::sgd, nn::OptimizerKind::adagrad};
  g.batch_sizes = {4, 6, 8, 10, 12, 14};
  g.epochs = {16, 20, 40, 60, 80};
  return g;
}

TuneResult coordinate_grid_search(const GridSpec& grid, model::ModelConfig start,
                                  const Evaluator& evaluate) {
  grid.validate();
  if (!evaluate) throw ArgumentError("no evaluator");
  TuneResult result;
  model::ModelConfig current = std::move(start);

  auto score = [&](const CandidateMetrics& m) {
    switch (grid.metric) {
      case SelectionMetric::precision: return m.precision.mean;
      case SelectionMetric::accuracy: return m.test_accuracy.mean;
      case SelectionMetric::f1: break;
    }
    return m.f1.mean;
  };

  // One axis: evaluate every candidate with the others held fixed.
  auto run_axis = [&](const std::string& axis, std::size_t count, auto&& apply, auto&& describe) {
    std::size_t best = 0;
    double best_score = -1.0;
    const std::size_t first_row = result.rows.size();
    for (std::size_t i = 0; i < count; ++i) {
      model::ModelConfig candidate = current;
      apply(candidate, i);
      CandidateRow row{axis, describe(i), evaluate(candidate), false};
      ++result.evaluations;
      const double s = score(row.metrics);
      if (s > best_score) {  // strict: ties keep the earlier candidate
        best_score = s;
        best = i;
      }
      result.rows.push_back(std::move(row));
    }
    result.rows[first_row + best].chosen = true;
    apply(current, best);
  };

  run_axis("fc", grid.fc.size(),
           [&](model::ModelConfig& c, std::size_t i) { c.fc = grid.fc[i]; },
           [&](std::size_t i) { return grid.fc[i].label(); });
  run_axis("optimizer", grid.optimizers.size(),
           [&](model::ModelConfig& c, std::size_t i) {
             c.optimizer = nn::OptimizerSettings::defaults_for(grid.optimizers[i]);
           },
           [&](std::size_t i) { return std::string(nn::to_string(grid.optimizers[i])); });
  run_axis("batch_size", grid.batch_sizes.size(),
           [&](model::ModelConfig& c, std::size_t i) { c.schedule.batch_size = grid.batch_sizes[i]; },
           [&](std::size_t i) { return std::to_string(grid.batch_sizes[i]); });
  run_axis("epochs", grid.epochs.size(),
           [&](model::ModelConfig& c, std::size_t i) { c.schedule.epochs = grid.epochs[i]; },
           [&](std::size_t i) { return std::to_string(grid.epochs[i]); });
  result.final_config = current;
  return result;
}

TuneResult coordinate_grid_search(const GridSpec& grid, model::ModelConfig start,
                                  const model::FeatureSet& data, std::size_t k, std::uint64_t seed,
                                  model::ExtractorPtr extractor) {
  const auto folds = stratified_kfold(data.y, k, seed);
  return coordinate_grid_search(grid, std::move(start), [&](const model::ModelConfig& c) {
    return evaluate_candidate(c, data, folds, extractor);
  });
}

std::string format_tune_report(const TuneResult& result) {
  std::string out =
      "hyperparameter\tvalue\tprecision\trecall\tf1\ttrain_accuracy\ttest_accuracy\tchosen\n";
  for (const auto& r : result.rows) {
    const auto& m = r.metrics;
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.axis, r.value, m.precision.cell(),
                       m.recall.cell(), m.f1.cell(), m.train_accuracy.cell(),
                       m.test_accuracy.cell(), r.chosen ? "*" : "");
  }
  return out;
}

}  // namespace berrystack::tuning
