#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssmhar/config.hpp"
#include "ssmhar/data.hpp"
#include "ssmhar/metrics.hpp"
#include "ssmhar/model.hpp"

namespace ssmhar {

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double val_acc_ovr = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> log;
  double best_val_f1 = -1.0;
  std::size_t best_epoch = 0;
  std::vector<unsigned char> best_checkpoint;

  // columns: epoch,train_loss,val_loss,val_acc_std,val_acc_ovr,val_f1
  std::string log_csv() const;
};

// Assembles windows [range.first, range.second) of the given index list
// into a (B, D_c, L) batch.
template <typename T>
Tensor<T> batch_tensor(const WindowedDataset& ds,
                       const std::vector<std::size_t>& idx, std::size_t first,
                       std::size_t last);

// Epoch loop with per-epoch validation; retains the checkpoint of the best
// validation weighted-F1 epoch. Deterministic for a fixed seed on one
// thread. Errors on an empty train or val split.
template <typename T>
TrainResult train_model(Model<T>& model, const WindowedDataset& ds,
                        const TrainConfig& tc, std::uint64_t seed);

// Forward-only evaluation over a split. Batches may be processed by
// `threads` workers; confusion counts are integers and per-thread partial
// losses merge in thread order, so results do not depend on scheduling.
template <typename T>
EvalReport evaluate_model(const Model<T>& model, const WindowedDataset& ds,
                          const std::string& split, std::size_t batch_size,
                          int threads = 1);

struct AblationRow {
  std::string variant;
  double mean_f1 = 0.0, std_f1 = 0.0;
  double mean_acc = 0.0, std_acc = 0.0;
  std::vector<double> per_seed_f1;
};

// Trains every variant of the named suite (directionality, channel_mode or
// class_token) under identical seeds and budget and reports test metrics.
std::vector<AblationRow> run_ablation(const std::string& suite,
                                      const RunConfig& base,
                                      const WindowedDataset& ds,
                                      const std::vector<std::uint64_t>& seeds);

std::string ablation_csv(const std::vector<AblationRow>& rows);

extern template TrainResult train_model(Model<float>&, const WindowedDataset&,
                                        const TrainConfig&, std::uint64_t);
extern template TrainResult train_model(Model<double>&, const WindowedDataset&,
                                        const TrainConfig&, std::uint64_t);

}  // namespace ssmhar
