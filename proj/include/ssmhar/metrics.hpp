#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ssmhar {

// Row = true class, column = predicted class.
struct ConfusionMatrix {
  std::size_t n_classes = 0;
  std::vector<std::int64_t> counts;  // n_classes * n_classes

  explicit ConfusionMatrix(std::size_t c = 0)
      : n_classes(c), counts(c * c, 0) {}
  std::int64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * n_classes + pred];
  }
  std::int64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * n_classes + pred];
  }
  std::int64_t total() const;
  std::int64_t trace() const;
  void merge(const ConfusionMatrix& other);
  std::string to_csv() const;
};

struct EvalReport {
  double accuracy = 0.0;      // correct / N
  double accuracy_ovr = 0.0;  // one-vs-rest (TP+TN) / (C*N) variant
  double weighted_f1 = 0.0;   // sum_c (n_c/N) * F1_c
  std::vector<double> precision;
  std::vector<double> recall;
  ConfusionMatrix confusion;
  double loss = 0.0;

  std::string to_json() const;
};

ConfusionMatrix confusion_from_pairs(const std::vector<int>& labels,
                                     const std::vector<int>& preds,
                                     std::size_t n_classes);

// Metrics from a confusion matrix. Classes with precision+recall == 0
// contribute 0 to the weighted F1 (a warning is logged).
EvalReport report_from_confusion(const ConfusionMatrix& cm, double loss = 0.0);

EvalReport evaluate_predictions(const std::vector<int>& labels,
                                const std::vector<int>& preds,
                                std::size_t n_classes, double loss = 0.0);

}  // namespace ssmhar
