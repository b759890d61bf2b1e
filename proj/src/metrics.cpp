#include "ssmhar/metrics.hpp"

#include <sstream>
#include <stdexcept>

#include "ssmhar/log.hpp"

namespace ssmhar {

std::int64_t ConfusionMatrix::total() const {
  std::int64_t n = 0;
  for (auto v : counts) n += v;
  return n;
}

std::int64_t ConfusionMatrix::trace() const {
  std::int64_t n = 0;
  for (std::size_t c = 0; c < n_classes; ++c) n += at(c, c);
  return n;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.n_classes != n_classes) {
    throw std::invalid_argument("confusion merge: class count mismatch");
  }
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

std::string ConfusionMatrix::to_csv() const {
  std::ostringstream os;
  for (std::size_t r = 0; r < n_classes; ++r) {
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (c) os << ",";
      os << at(r, c);
    }
    os << "\n";
  }
  return os.str();
}

ConfusionMatrix confusion_from_pairs(const std::vector<int>& labels,
                                     const std::vector<int>& preds,
                                     std::size_t n_classes) {
  if (labels.size() != preds.size()) {
    throw std::invalid_argument("confusion: label/prediction count mismatch");
  }
  ConfusionMatrix cm(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes ||
        preds[i] < 0 || static_cast<std::size_t>(preds[i]) >= n_classes) {
      throw std::invalid_argument("confusion: class id out of range at index " +
                                  std::to_string(i));
    }
    cm.at(static_cast<std::size_t>(labels[i]),
          static_cast<std::size_t>(preds[i])) += 1;
  }
  return cm;
}

EvalReport report_from_confusion(const ConfusionMatrix& cm, double loss) {
  EvalReport rep;
  rep.confusion = cm;
  rep.loss = loss;
  const std::size_t ncls = cm.n_classes;
  const std::int64_t n = cm.total();
  rep.precision.assign(ncls, 0.0);
  rep.recall.assign(ncls, 0.0);
  if (n == 0) return rep;

  std::int64_t tp_tn_sum = 0;
  double f1_weighted = 0.0;
  for (std::size_t c = 0; c < ncls; ++c) {
    std::int64_t tp = cm.at(c, c);
    std::int64_t row = 0, col = 0;
    for (std::size_t k = 0; k < ncls; ++k) {
      row += cm.at(c, k);
      col += cm.at(k, c);
    }
    const std::int64_t fn = row - tp;
    const std::int64_t fp = col - tp;
    const std::int64_t tn = n - tp - fn - fp;
    tp_tn_sum += tp + tn;
    rep.precision[c] = (tp + fp) ? static_cast<double>(tp) / (tp + fp) : 0.0;
    rep.recall[c] = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double pr = rep.precision[c] + rep.recall[c];
    double f1c = 0.0;
    if (pr > 0.0) {
      f1c = 2.0 * rep.precision[c] * rep.recall[c] / pr;
    } else if (row > 0) {
      log_warn("class %zu has precision+recall == 0; its F1 counts as 0", c);
    }
    const double wc = static_cast<double>(row) / static_cast<double>(n);
    f1_weighted += wc * f1c;
  }
  rep.accuracy = static_cast<double>(cm.trace()) / static_cast<double>(n);
  rep.accuracy_ovr = static_cast<double>(tp_tn_sum) /
                     (static_cast<double>(ncls) * static_cast<double>(n));
  rep.weighted_f1 = f1_weighted;
  return rep;
}

EvalReport evaluate_predictions(const std::vector<int>& labels,
                                const std::vector<int>& preds,
                                std::size_t n_classes, double loss) {
  return report_from_confusion(confusion_from_pairs(labels, preds, n_classes),
                               loss);
}

std::string EvalReport::to_json() const {
  std::ostringstream os;
  os.precision(12);
  os << "{\n";
  os << "  \"accuracy\": " << accuracy << ",\n";
  os << "  \"accuracy_ovr\": " << accuracy_ovr << ",\n";
  os << "  \"weighted_f1\": " << weighted_f1 << ",\n";
  os << "  \"loss\": " << loss << ",\n";
  os << "  \"precision\": [";
  for (std::size_t c = 0; c < precision.size(); ++c) {
    if (c) os << ", ";
    os << precision[c];
  }
  os << "],\n  \"recall\": [";
  for (std::size_t c = 0; c < recall.size(); ++c) {
    if (c) os << ", ";
    os << recall[c];
  }
  os << "]\n}\n";
  return os.str();
}

}  // namespace ssmhar
