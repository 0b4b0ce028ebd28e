#include "berrystack/evalx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "berrystack/errors.hpp"
#include "berrystack/io_util.hpp"
#include "berrystack/model.hpp"

namespace berrystack::evalx {

ConfusionMatrix confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw ArgumentError(fmt::format("{} predictions for {} labels", predictions.size(),
                                    labels.size()));
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) {
      throw ArgumentError(fmt::format("entry {} is not binary", i));
    }
    if (y == 1) (p == 1 ? cm.tp : cm.fn)++;
    else (p == 1 ? cm.fp : cm.tn)++;
  }
  return cm;
}

MetricsReport weighted_metrics(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw ArgumentError("weighted_metrics of an empty confusion matrix");
  const double n = static_cast<double>(total);

  struct PerClass {
    const char* name;
    std::size_t hit, predicted, support;
  };
  const PerClass classes[2] = {{"ripe", cm.tn, cm.tn + cm.fn, cm.tn + cm.fp},
                               {"unripe", cm.tp, cm.tp + cm.fp, cm.tp + cm.fn}};
  MetricsReport r;
  r.accuracy = static_cast<double>(cm.tp + cm.tn) / n;
  // Support-weighted recall: sum_c support_c * hit_c / support_c = hits / n.
  r.weighted_recall = static_cast<double>(cm.tp + cm.tn) / n;
  for (const auto& c : classes) {
    if (c.support == 0) continue;
    const double w = static_cast<double>(c.support) / n;
    double precision = 0.0;
    if (c.predicted == 0) {
      r.warnings.push_back(fmt::format("no sample predicted {}; its precision is taken as 0", c.name));
    } else {
      precision = static_cast<double>(c.hit) / static_cast<double>(c.predicted);
    }
    const double recall = static_cast<double>(c.hit) / static_cast<double>(c.support);
    const double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
    r.weighted_precision += w * precision;
    r.weighted_f1 += w * f1;
  }
  return r;
}

namespace {

struct Sweep {
  std::vector<double> thresholds;
  std::vector<std::size_t> tp, fp;  // cumulative counts at score >= threshold
  std::size_t positives = 0, negatives = 0;
};

Sweep sweep(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ArgumentError("scores and labels must be non-empty and of equal length");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw ArgumentError(fmt::format("score {} is not finite", i));
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw ArgumentError(fmt::format("label {} is not binary", i));
    }
  }
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  Sweep s;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (labels[order[i]] == 1.0 ? tp : fp)++;
    const bool last_of_tie = i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]];
    if (last_of_tie) {
      s.thresholds.push_back(scores[order[i]]);
      s.tp.push_back(tp);
      s.fp.push_back(fp);
    }
  }
  s.positives = tp;
  s.negatives = fp;
  return s;
}

}  // namespace

CurvePoints roc_auc(std::span<const double> confidences, std::span<const double> labels) {
  const Sweep s = sweep(confidences, labels);
  if (s.positives == 0 || s.negatives == 0) {
    throw ArgumentError("roc_auc needs both classes present");
  }
  CurvePoints c;
  c.kind = CurveKind::roc;
  c.points.emplace_back(0.0, 0.0);
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  const double P = static_cast<double>(s.positives), N = static_cast<double>(s.negatives);
  // Trapezoids in integer units (fp steps x tp heights), scaled once at the end.
  double area = 0.0;
  std::size_t prev_tp = 0, prev_fp = 0;
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    area += static_cast<double>(s.fp[i] - prev_fp) * static_cast<double>(s.tp[i] + prev_tp) / 2.0;
    prev_tp = s.tp[i];
    prev_fp = s.fp[i];
    c.points.emplace_back(static_cast<double>(s.fp[i]) / N, static_cast<double>(s.tp[i]) / P);
    c.thresholds.push_back(s.thresholds[i]);
  }
  c.auc = area / (P * N);
  return c;
}

CurvePoints pr_curve(std::span<const double> confidences, std::span<const double> labels) {
  const Sweep s = sweep(confidences, labels);
  if (s.positives == 0) throw ArgumentError("pr_curve needs at least one positive");
  CurvePoints c;
  c.kind = CurveKind::pr;
  const double P = static_cast<double>(s.positives);
  for (std::size_t i = 0; i < s.thresholds.size(); ++i) {
    const double predicted = static_cast<double>(s.tp[i] + s.fp[i]);
    c.points.emplace_back(static_cast<double>(s.tp[i]) / P, static_cast<double>(s.tp[i]) / predicted);
    c.thresholds.push_back(s.thresholds[i]);
  }
  return c;
}

std::string format_curve(const CurvePoints& curve) {
  std::string out = curve.kind == CurveKind::roc ? "fpr\ttpr\tthreshold\n" : "recall\tprecision\tthreshold\n";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    out += fmt::format("{:.6f}\t{:.6f}\t{}\n", curve.points[i].first, curve.points[i].second,
                       curve.thresholds[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

void SensoryRecord::validate() const {
  auto scale = [&](const std::optional<int>& v, const char* name) {
    if (v && (*v < 1 || *v > 5)) {
      throw ArgumentError(fmt::format("{}: {} = {} outside 1..5", berry_id, name, *v));
    }
  };
  scale(shininess, "shininess");
  scale(colour_uniformity, "colour_uniformity");
  scale(firmness, "firmness");
  scale(flavor, "flavor");
  scale(sweetness, "sweetness");
  scale(texture, "texture");
  if (human_ripeness && (*human_ripeness < 0 || *human_ripeness > 4)) {
    throw ArgumentError(fmt::format("{}: human_ripeness outside 0..4", berry_id));
  }
  if (mass_g && !(*mass_g > 0)) throw ArgumentError(fmt::format("{}: mass must be positive", berry_id));
  if (target != 0 && target != 1) throw ArgumentError(fmt::format("{}: target must be 0 or 1", berry_id));
  if (!(machine_confidence_pct >= 0 && machine_confidence_pct <= 100)) {
    throw ArgumentError(fmt::format("{}: machine confidence outside 0..100", berry_id));
  }
}

namespace {

const std::vector<std::string> kSensoryColumns = {
    "berry_id", "mass",    "shininess", "colour_uniformity", "firmness",           "skin_strength",
    "flavor",   "sweetness", "texture", "human_ripeness",    "target", "machine_confidence"};

double parse_real(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw FormatError(fmt::format("{}: '{}' is not a number", where, s));
  }
}

std::optional<double> opt_real(const std::string& s, const std::string& where) {
  if (s == "-") return std::nullopt;
  return parse_real(s, where);
}

std::optional<int> opt_int(const std::string& s, const std::string& where) {
  if (s == "-") return std::nullopt;
  const double v = parse_real(s, where);
  if (v != std::floor(v)) throw FormatError(fmt::format("{}: '{}' is not an integer", where, s));
  return static_cast<int>(v);
}

}  // namespace

std::vector<SensoryRecord> load_sensory(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::string line;
  std::vector<SensoryRecord> out;
  bool header = true;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (io::trim(line).empty() || line[0] == '#') continue;
    auto cols = io::split(line, '\t');
    for (auto& c : cols) c = io::trim(c);
    if (header) {
      if (cols != kSensoryColumns) {
        throw FormatError(fmt::format("{}: unexpected header", path.string()));
      }
      header = false;
      continue;
    }
    const std::string where = fmt::format("{}:{}", path.string(), line_no);
    if (cols.size() != kSensoryColumns.size()) {
      throw FormatError(fmt::format("{}: expected {} columns, found {}", where,
                                    kSensoryColumns.size(), cols.size()));
    }
    SensoryRecord r;
    r.berry_id = cols[0];
    r.mass_g = opt_real(cols[1], where);
    r.shininess = opt_int(cols[2], where);
    r.colour_uniformity = opt_int(cols[3], where);
    r.firmness = opt_int(cols[4], where);
    if (cols[5] == "Y") r.skin_strength = true;
    else if (cols[5] == "N") r.skin_strength = false;
    else if (cols[5] != "-") throw FormatError(fmt::format("{}: skin_strength must be Y, N or -", where));
    r.flavor = opt_int(cols[6], where);
    r.sweetness = opt_int(cols[7], where);
    r.texture = opt_int(cols[8], where);
    r.human_ripeness = opt_real(cols[9], where);
    const auto target = opt_int(cols[10], where);
    if (!target) throw FormatError(fmt::format("{}: target is required", where));
    r.target = *target;
    r.machine_confidence_pct = parse_real(cols[11], where);
    try {
      r.validate();
    } catch (const ArgumentError& e) {
      throw FormatError(fmt::format("{}: {}", where, e.what()));
    }
    out.push_back(std::move(r));
  }
  if (header) throw FormatError(fmt::format("{}: empty sensory table", path.string()));
  return out;
}

std::vector<std::string> default_sensory_variables() {
  return {"mass",    "shininess", "colour_uniformity", "firmness", "skin_strength",  "flavor",
          "sweetness", "texture", "human_ripeness",    "target",   "machine_label", "machine_confidence"};
}

std::optional<double> sensory_value(const SensoryRecord& r, std::string_view v) {
  auto as_real = [](const std::optional<int>& x) -> std::optional<double> {
    if (x) return static_cast<double>(*x);
    return std::nullopt;
  };
  if (v == "mass") return r.mass_g;
  if (v == "shininess") return as_real(r.shininess);
  if (v == "colour_uniformity") return as_real(r.colour_uniformity);
  if (v == "firmness") return as_real(r.firmness);
  if (v == "skin_strength") {
    if (r.skin_strength) return *r.skin_strength ? 1.0 : 0.0;
    return std::nullopt;
  }
  if (v == "flavor") return as_real(r.flavor);
  if (v == "sweetness") return as_real(r.sweetness);
  if (v == "texture") return as_real(r.texture);
  if (v == "human_ripeness") return r.human_ripeness;
  if (v == "target") return static_cast<double>(r.target);
  if (v == "machine_label") return static_cast<double>(model::classify(r.machine_confidence_pct / 100.0));
  if (v == "machine_confidence") return r.machine_confidence_pct;
  throw ArgumentError(fmt::format("unknown sensory variable '{}'", v));
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> CorrelationMatrix::at(std::string_view a, std::string_view b) const {
  auto index = [&](std::string_view v) {
    auto it = std::find(names.begin(), names.end(), v);
    if (it == names.end()) throw ArgumentError(fmt::format("no variable '{}' in the matrix", v));
    return static_cast<std::size_t>(it - names.begin());
  };
  return r[index(a)][index(b)];
}

CorrelationMatrix pearson_matrix(const std::vector<SensoryRecord>& records,
                                 const std::vector<std::string>& variables) {
  if (records.size() < 3) throw ArgumentError("pearson_matrix needs at least 3 records");
  if (variables.empty()) throw ArgumentError("pearson_matrix needs at least one variable");
  const std::size_t v = variables.size();
  std::vector<std::vector<std::optional<double>>> cols(v);
  for (std::size_t j = 0; j < v; ++j) {
    for (const auto& r : records) cols[j].push_back(sensory_value(r, variables[j]));
  }
  CorrelationMatrix m{variables, std::vector(v, std::vector<std::optional<double>>(v)),
                      std::vector(v, std::vector<std::size_t>(v, 0))};
  for (std::size_t a = 0; a < v; ++a) {
    for (std::size_t b = a; b < v; ++b) {
      std::vector<double> x, y;
      for (std::size_t i = 0; i < records.size(); ++i) {
        if (cols[a][i] && cols[b][i]) {
          x.push_back(*cols[a][i]);
          y.push_back(*cols[b][i]);
        }
      }
      auto r = pearson(x, y);
      if (a == b && r) r = 1.0;  // exact unit diagonal
      m.r[a][b] = m.r[b][a] = r;
      m.pairs[a][b] = m.pairs[b][a] = x.size();
    }
  }
  return m;
}

std::string format_correlation(const CorrelationMatrix& m) {
  std::string out = "variable";
  for (const auto& n : m.names) out += "\t" + n;
  out += "\n";
  for (std::size_t a = 0; a < m.names.size(); ++a) {
    out += m.names[a];
    for (std::size_t b = 0; b < m.names.size(); ++b) {
      out += m.r[a][b] ? fmt::format("\t{:.5f}", *m.r[a][b]) : std::string("\tNA");
    }
    out += "\n";
  }
  return out;
}

std::vector<SensoryComparison> sensory_report(const std::vector<SensoryRecord>& records) {
  std::vector<SensoryComparison> rows;
  for (const auto& r : records) {
    r.validate();
    SensoryComparison c;
    c.berry_id = r.berry_id;
    c.target = r.target;
    c.confidence_pct = r.machine_confidence_pct;
    c.machine_label = model::classify(r.machine_confidence_pct / 100.0);
    c.agrees = c.machine_label == r.target;
    c.near_boundary = std::abs(r.machine_confidence_pct - 50.0) <= 10.0;
    rows.push_back(std::move(c));
  }
  return rows;
}

std::string format_sensory_report(const std::vector<SensoryComparison>& rows) {
  std::string out = "berry_id\ttarget\tmachine_label\tconfidence_pct\tagreement\tnear_boundary\n";
  std::size_t agree = 0;
  for (const auto& r : rows) {
    out += fmt::format("{}\t{}\t{}\t{:.2f}\t{}\t{}\n", r.berry_id, r.target, r.machine_label,
                       r.confidence_pct, r.agrees ? "agree" : "DISAGREE",
                       r.near_boundary ? "*" : "");
    agree += r.agrees;
  }
  out += fmt::format("# agreement {}/{}\n", agree, rows.size());
  return out;
}

}  // namespace berrystack::evalx
