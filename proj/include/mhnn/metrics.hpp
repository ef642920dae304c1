#pragma once

// Confusion-matrix accumulation and accuracy / precision / recall / F1 with
// macro averaging. Per-class counts: TP = cm[k][k], FN = row sum - TP,
// FP = column sum - TP. A zero denominator yields 0 for that class and the
// class is flagged in the report.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mhnn/common.hpp"

namespace mhnn::metrics {

struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::uint64_t> counts;  // row = true class, col = predicted

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t k) : classes(k), counts(k * k, 0) {}

  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * classes + pred];
  }
  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * classes + pred];
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    require(classes == other.classes, "confusion matrix size mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    return *this;
  }
};

inline ConfusionMatrix confusion(const std::vector<std::uint32_t>& preds,
                                 const std::vector<std::uint32_t>& labels,
                                 std::size_t classes) {
  require(preds.size() == labels.size(), "preds/labels length mismatch");
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    require(preds[i] < classes && labels[i] < classes,
            "class index out of range");
    ++cm.at(labels[i], preds[i]);
  }
  return cm;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.total();
  require(total > 0, "empty confusion matrix");
  std::uint64_t correct = 0;
  for (std::size_t k = 0; k < cm.classes; ++k) correct += cm.at(k, k);
  return static_cast<double>(correct) / static_cast<double>(total);
}

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool flagged = false;  // a zero denominator forced a 0
};

// Per-class precision/recall/F1 plus the unweighted macro average.
inline std::pair<std::vector<ClassMetrics>, ClassMetrics> precision_recall_f1(
    const ConfusionMatrix& cm) {
  require(cm.total() > 0, "empty confusion matrix");
  std::vector<ClassMetrics> per_class(cm.classes);
  ClassMetrics macro;
  for (std::size_t k = 0; k < cm.classes; ++k) {
    const double tp = static_cast<double>(cm.at(k, k));
    double row = 0, col = 0;
    for (std::size_t j = 0; j < cm.classes; ++j) {
      row += static_cast<double>(cm.at(k, j));
      col += static_cast<double>(cm.at(j, k));
    }
    const double fn = row - tp;
    const double fp = col - tp;
    ClassMetrics& m = per_class[k];
    if (tp + fp > 0)
      m.precision = tp / (tp + fp);
    else
      m.flagged = true;
    if (tp + fn > 0)
      m.recall = tp / (tp + fn);
    else
      m.flagged = true;
    if (m.precision + m.recall > 0)
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    else
      m.flagged = true;
    macro.precision += m.precision;
    macro.recall += m.recall;
    macro.f1 += m.f1;
  }
  const double k = static_cast<double>(cm.classes);
  macro.precision /= k;
  macro.recall /= k;
  macro.f1 /= k;
  return {per_class, macro};
}

struct MetricsSummary {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  ConfusionMatrix cm;
};

inline MetricsSummary summarize(const ConfusionMatrix& cm) {
  MetricsSummary s;
  s.accuracy = accuracy(cm);
  auto [per_class, macro] = precision_recall_f1(cm);
  s.per_class = std::move(per_class);
  s.macro_precision = macro.precision;
  s.macro_recall = macro.recall;
  s.macro_f1 = macro.f1;
  s.cm = cm;
  return s;
}

inline nlohmann::json metrics_json(const MetricsSummary& s) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t k = 0; k < s.per_class.size(); ++k) {
    const auto& m = s.per_class[k];
    per_class.push_back({{"class", k},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"flagged", m.flagged}});
  }
  nlohmann::json confusion = nlohmann::json::array();
  for (std::size_t t = 0; t < s.cm.classes; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t p = 0; p < s.cm.classes; ++p) row.push_back(s.cm.at(t, p));
    confusion.push_back(row);
  }
  return nlohmann::json{{"accuracy", s.accuracy},
                        {"macro_precision", s.macro_precision},
                        {"macro_recall", s.macro_recall},
                        {"macro_f1", s.macro_f1},
                        {"per_class", per_class},
                        {"confusion", confusion}};
}

}  // namespace mhnn::metrics
