#include "ssmhar/train.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "ssmhar/checkpoint.hpp"
#include "ssmhar/log.hpp"
#include "ssmhar/ops.hpp"
#include "ssmhar/optim.hpp"

namespace ssmhar {

namespace {

std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::vector<int> labels_for(const WindowedDataset& ds,
                            const std::vector<std::size_t>& idx,
                            std::size_t first, std::size_t last) {
  std::vector<int> out;
  out.reserve(last - first);
  for (std::size_t i = first; i < last; ++i) out.push_back(ds.windows[idx[i]].label);
  return out;
}

}  // namespace

template <typename T>
Tensor<T> batch_tensor(const WindowedDataset& ds,
                       const std::vector<std::size_t>& idx, std::size_t first,
                       std::size_t last) {
  const std::size_t bsz = last - first;
  const std::size_t ch = ds.channel_count();
  const std::size_t len = ds.window_len;
  Tensor<T> x = Tensor<T>::uninit({bsz, ch, len});
  for (std::size_t b = 0; b < bsz; ++b) {
    const SensorWindow& w = ds.windows[idx[first + b]];
    T* dst = x.data() + b * ch * len;
    for (std::size_t i = 0; i < ch * len; ++i) dst[i] = static_cast<T>(w.data[i]);
  }
  return x;
}

std::string TrainResult::log_csv() const {
  std::string out = "epoch,train_loss,val_loss,val_acc_std,val_acc_ovr,val_f1\n";
  for (const auto& row : log) {
    out += std::to_string(row.epoch) + "," + fmt_g9(row.train_loss) + "," +
           fmt_g9(row.val_loss) + "," + fmt_g9(row.val_acc) + "," +
           fmt_g9(row.val_acc_ovr) + "," + fmt_g9(row.val_f1) + "\n";
  }
  return out;
}

template <typename T>
EvalReport evaluate_model(const Model<T>& model, const WindowedDataset& ds,
                          const std::string& split, std::size_t batch_size,
                          int threads) {
  auto [first, last] = ds.split_range(split);
  if (first == last) {
    throw std::invalid_argument("evaluate: split '" + split + "' is empty");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = first; i < last; ++i) idx.push_back(i);
  const std::size_t n = idx.size();
  const std::size_t n_batches = (n + batch_size - 1) / batch_size;

  const int workers =
      std::max(1, std::min<int>(threads, static_cast<int>(n_batches)));
  std::vector<ConfusionMatrix> cms(workers,
                                   ConfusionMatrix(model.cfg.classes));
  std::vector<double> losses(workers, 0.0);

  auto run_range = [&](int w, std::size_t lo, std::size_t hi) {
    for (std::size_t bi = lo; bi < hi; ++bi) {
      const std::size_t a = bi * batch_size;
      const std::size_t b = std::min(n, a + batch_size);
      Tensor<T> x = batch_tensor<T>(ds, idx, a, b);
      std::vector<int> lab = labels_for(ds, idx, a, b);
      Tensor<T> logits = model.forward(x);  // no tape: forward only
      Tensor<T> loss = ops::cross_entropy(logits, lab);
      losses[w] += static_cast<double>(loss.item()) * static_cast<double>(b - a);
      std::vector<int> preds = predict_labels(logits);
      cms[w].merge(confusion_from_pairs(lab, preds, model.cfg.classes));
    }
  };

  if (workers == 1) {
    run_range(0, 0, n_batches);
  } else {
    std::vector<std::thread> pool;
    const std::size_t per = (n_batches + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const std::size_t lo = per * w;
      const std::size_t hi = std::min(n_batches, lo + per);
      if (lo >= hi) break;
      pool.emplace_back(run_range, w, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  ConfusionMatrix cm(model.cfg.classes);
  double loss_sum = 0.0;
  for (int w = 0; w < workers; ++w) {
    cm.merge(cms[w]);
    loss_sum += losses[w];  // fixed merge order keeps this deterministic
  }
  return report_from_confusion(cm, loss_sum / static_cast<double>(n));
}

template <typename T>
TrainResult train_model(Model<T>& model, const WindowedDataset& ds,
                        const TrainConfig& tc, std::uint64_t seed) {
  if (ds.split.train == 0) throw std::invalid_argument("train: empty train split");
  if (ds.split.val == 0) throw std::invalid_argument("train: empty val split");

  auto params = model.parameters();
  AdamW<T> opt(tc.optim);
  TrainResult result;

  std::vector<std::size_t> order(ds.split.train);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    // seeded per-epoch shuffle stream
    RngStream shuffle =
        stream_for(seed, "shuffle/epoch" + std::to_string(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = shuffle.size_below(i);
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    const std::size_t n = order.size();
    for (std::size_t a = 0; a < n; a += tc.batch_size) {
      const std::size_t b = std::min(n, a + tc.batch_size);
      Tensor<T> x = batch_tensor<T>(ds, order, a, b);
      std::vector<int> lab = labels_for(ds, order, a, b);
      TapeScope<T> scope;
      Tensor<T> logits = model.forward(x);
      Tensor<T> loss = ops::cross_entropy(logits, lab);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(b - a);
      scope.tape().backward(loss);
      opt.step(params);
      model.zero_grad();
    }

    EvalReport val = evaluate_model(model, ds, "val", tc.batch_size, 1);
    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(n);
    row.val_loss = val.loss;
    row.val_acc = val.accuracy;
    row.val_acc_ovr = val.accuracy_ovr;
    row.val_f1 = val.weighted_f1;
    result.log.push_back(row);
    log_info("epoch %zu: train_loss=%.4f val_loss=%.4f val_acc=%.4f val_f1=%.4f",
             epoch, row.train_loss, row.val_loss, row.val_acc, row.val_f1);

    if (val.weighted_f1 > result.best_val_f1) {
      result.best_val_f1 = val.weighted_f1;
      result.best_epoch = epoch;
      result.best_checkpoint = serialize_checkpoint(params);
    }
  }
  return result;
}

namespace {

struct Variant {
  std::string label;
  ModelConfig cfg;
};

std::vector<Variant> suite_variants(const std::string& suite,
                                    const ModelConfig& base) {
  std::vector<Variant> out;
  if (suite == "directionality") {
    ModelConfig uni = base;
    uni.bidirectional = false;
    uni.use_conv = false;
    ModelConfig bi = base;
    bi.bidirectional = true;
    bi.use_conv = false;
    ModelConfig bi_conv = base;
    bi_conv.bidirectional = true;
    bi_conv.use_conv = true;
    out.push_back({"SSM", uni});
    out.push_back({"Bidirectional SSM", bi});
    out.push_back({"Bidirectional SSM + Conv1D", bi_conv});
  } else if (suite == "channel_mode") {
    ModelConfig fusion = base;
    fusion.channel_mode = ChannelMode::kFusion;
    ModelConfig indep = base;
    indep.channel_mode = ChannelMode::kIndependent;
    out.push_back({"Channel Fusion", fusion});
    out.push_back({"Channel Independent", indep});
  } else if (suite == "class_token") {
    ModelConfig none = base;
    none.class_token = ClassTokenMode::kNone;
    ModelConfig end = base;
    end.class_token = ClassTokenMode::kEnd;
    out.push_back({"No class token", none});
    out.push_back({"End class token", end});
  } else {
    throw std::invalid_argument(
        "unknown ablation suite '" + suite +
        "' (valid: directionality, channel_mode, class_token)");
  }
  return out;
}

}  // namespace

std::vector<AblationRow> run_ablation(const std::string& suite,
                                      const RunConfig& base,
                                      const WindowedDataset& ds,
                                      const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw std::invalid_argument("run_ablation: no seeds");
  std::vector<AblationRow> rows;
  for (const auto& variant : suite_variants(suite, base.model)) {
    AblationRow row;
    row.variant = variant.label;
    std::vector<double> f1s, accs;
    for (std::uint64_t seed : seeds) {
      Model<float> model = Model<float>::init(variant.cfg, seed);
      auto params = model.parameters();
      TrainResult tr = train_model(model, ds, base.train, seed);
      load_checkpoint_bytes(tr.best_checkpoint, params);
      EvalReport rep =
          evaluate_model(model, ds, "test", base.train.batch_size, base.threads);
      f1s.push_back(rep.weighted_f1);
      accs.push_back(rep.accuracy);
      log_info("ablation %s / seed %llu: f1=%.4f acc=%.4f", variant.label.c_str(),
               static_cast<unsigned long long>(seed), rep.weighted_f1,
               rep.accuracy);
    }
    auto mean_std = [](const std::vector<double>& v) {
      double m = 0.0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - m) * (x - m);
      var /= static_cast<double>(v.size());
      return std::make_pair(m, std::sqrt(var));
    };
    std::tie(row.mean_f1, row.std_f1) = mean_std(f1s);
    std::tie(row.mean_acc, row.std_acc) = mean_std(accs);
    row.per_seed_f1 = f1s;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,mean_f1,std_f1,mean_accuracy,std_accuracy\n";
  for (const auto& r : rows) {
    out += r.variant + "," + fmt_g9(r.mean_f1) + "," + fmt_g9(r.std_f1) + "," +
           fmt_g9(r.mean_acc) + "," + fmt_g9(r.std_acc) + "\n";
  }
  return out;
}

#define SSMHAR_INSTANTIATE_TRAIN(T)                                           \
  template Tensor<T> batch_tensor(const WindowedDataset&,                     \
                                  const std::vector<std::size_t>&,            \
                                  std::size_t, std::size_t);                  \
  template TrainResult train_model(Model<T>&, const WindowedDataset&,         \
                                   const TrainConfig&, std::uint64_t);        \
  template EvalReport evaluate_model(const Model<T>&, const WindowedDataset&, \
                                     const std::string&, std::size_t, int);

SSMHAR_INSTANTIATE_TRAIN(float)
SSMHAR_INSTANTIATE_TRAIN(double)

}  // namespace ssmhar
