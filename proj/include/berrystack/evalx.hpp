#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Evaluation maths: confusion counts, support-weighted metrics, ROC / PR
// curves, Pearson correlation with pairwise deletion, and the comparison of
// human and machine sensory assessments.

namespace berrystack::evalx {

/// Positive class is unripe (label 1).
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels);

struct MetricsReport {
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  std::vector<std::string> warnings;
};

/// Per-class precision / recall / F1 averaged with label counts as weights.
/// A class nobody predicted has precision 0 (and a warning).
MetricsReport weighted_metrics(const ConfusionMatrix& cm);

enum class CurveKind { roc, pr };

struct CurvePoints {
  CurveKind kind = CurveKind::roc;
  std::vector<std::pair<double, double>> points;  // (x, y)
  std::vector<double> thresholds;  // score threshold behind each point (roc: +inf first)
  double auc = 0.0;                // roc only
};

/// Thresholds at every distinct score, high to low; tied scores move
/// together, giving a diagonal segment. Starts at (0,0), ends at (1,1).
CurvePoints roc_auc(std::span<const double> confidences, std::span<const double> labels);

/// (recall, precision) at each distinct-score threshold, high to low.
CurvePoints pr_curve(std::span<const double> confidences, std::span<const double> labels);

/// Points as "x\ty" lines under a header.
std::string format_curve(const CurvePoints& curve);

// ---------------------------------------------------------------------------
// Sensory panel

struct SensoryRecord {
  std::string berry_id;
  std::optional<double> mass_g;
  std::optional<int> shininess, colour_uniformity, firmness;  // 1..5
  std::optional<bool> skin_strength;                          // Y / N
  std::optional<int> flavor, sweetness, texture;               // 1..5
  std::optional<double> human_ripeness;                       // 0..4
  int target = 0;
  double machine_confidence_pct = 0.0;  // 0..100

  void validate() const;  // ArgumentError naming the field
};

/// Tab-separated with header
///   berry_id mass shininess colour_uniformity firmness skin_strength flavor
///   sweetness texture human_ripeness target machine_confidence
/// "-" marks a missing value. FormatError on malformed rows.
std::vector<SensoryRecord> load_sensory(const std::filesystem::path& path);

/// mass, shininess, colour_uniformity, firmness, skin_strength (Y=1),
/// flavor, sweetness, texture, human_ripeness, target, machine_label,
/// machine_confidence.
std::vector<std::string> default_sensory_variables();

std::optional<double> sensory_value(const SensoryRecord& r, std::string_view variable);

/// Undefined (nullopt) for fewer than 3 complete pairs or a constant side.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::vector<std::optional<double>>> r;
  std::vector<std::vector<std::size_t>> pairs;  // complete pairs per cell

  std::optional<double> at(std::string_view a, std::string_view b) const;
};

CorrelationMatrix pearson_matrix(const std::vector<SensoryRecord>& records,
                                 const std::vector<std::string>& variables);

/// Tab-separated; undefined cells print "NA".
std::string format_correlation(const CorrelationMatrix& m);

struct SensoryComparison {
  std::string berry_id;
  int target = 0;
  double confidence_pct = 0.0;
  int machine_label = 0;
  bool agrees = false;
  bool near_boundary = false;  // |confidence - 50| <= 10
};

std::vector<SensoryComparison> sensory_report(const std::vector<SensoryRecord>& records);
std::string format_sensory_report(const std::vector<SensoryComparison>& rows);

}  // namespace berrystack::evalx
