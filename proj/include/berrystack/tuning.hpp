#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "berrystack/model.hpp"

// Stratified k-fold evaluation and the axis-by-axis hyperparameter search
// (FC layers, then optimizer, then batch size, then epochs).

namespace berrystack::tuning {

struct FoldAssignment {
  std::size_t k = 10;
  std::uint64_t seed = 0;
  std::vector<std::size_t> fold;  // per sample

  std::vector<std::size_t> members(std::size_t f) const;
  std::vector<std::size_t> complement(std::size_t f) const;
};

/// Each class is shuffled with `seed` and dealt round-robin into the folds;
/// the dealing position carries over from one class to the next so total
/// fold sizes also differ by at most one.
FoldAssignment stratified_kfold(const std::vector<double>& labels, std::size_t k,
                                std::uint64_t seed);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation

  static MetricSummary of(const std::vector<double>& values);
  std::string cell() const;  // "0.923±0.048"
};

struct CandidateMetrics {
  MetricSummary precision, recall, f1, train_accuracy, test_accuracy;
  std::size_t trainings = 0;
};

/// For every fold: the fold is the test set; from the rest, 1/max(k-1, 2) of
/// each class (at least one sample) is held out for early stopping; the
/// remainder is randomly oversampled and trains a head. Weighted metrics are
/// taken on the test fold. Folds run in parallel when OpenMP is available.
CandidateMetrics evaluate_candidate(const model::ModelConfig& config, const model::FeatureSet& data,
                                    const FoldAssignment& folds, model::ExtractorPtr extractor);

enum class SelectionMetric { precision, f1, accuracy };
SelectionMetric selection_metric_from_string(const std::string& name);

struct GridSpec {
  std::vector<model::FcSpec> fc;
  std::vector<nn::OptimizerKind> optimizers;
  std::vector<int> batch_sizes;
  std::vector<int> epochs;
  SelectionMetric metric = SelectionMetric::f1;

  void validate() const;  // ArgumentError on an empty axis
  static GridSpec default_grid();
};

struct CandidateRow {
  std::string axis;   // "fc", "optimizer", "batch_size", "epochs"
  std::string value;
  CandidateMetrics metrics;
  bool chosen = false;
};

struct TuneResult {
  std::vector<CandidateRow> rows;
  model::ModelConfig final_config;
  std::size_t evaluations = 0;
};

using Evaluator = std::function<CandidateMetrics(const model::ModelConfig&)>;

/// Walks the axes in order, fixing the best candidate of each (ties go to
/// the first) before moving on. Changing optimizer resets its learning rate
/// to that optimizer's default.
TuneResult coordinate_grid_search(const GridSpec& grid, model::ModelConfig start,
                                  const Evaluator& evaluate);

TuneResult coordinate_grid_search(const GridSpec& grid, model::ModelConfig start,
                                  const model::FeatureSet& data, std::size_t k, std::uint64_t seed,
                                  model::ExtractorPtr extractor);

/// Tab-separated: hyperparameter, value, precision, recall, f1,
/// train_accuracy, test_accuracy (mean±std), chosen.
std::string format_tune_report(const TuneResult& result);

}  // namespace berrystack::tuning
