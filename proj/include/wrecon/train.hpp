#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wrecon/checkpoint.hpp"
#include "wrecon/data.hpp"
#include "wrecon/metrics.hpp"
#include "wrecon/model.hpp"

namespace wrecon {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 4;
  float lr = 1e-3f;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;  // 0 is the untrained starting point
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  MetricStats val_nmse, val_psnr, val_ssim, val_hfen;
};

struct TrainResult {
  std::vector<EpochLog> log;
  Checkpoint best;  // highest mean validation PSNR, earliest on ties
  Checkpoint last;
  std::size_t best_epoch = 0;
};

using EpochHook = std::function<void(const EpochLog&)>;

/// Adam on the batch mean of per-image squared errors. Epoch 0 only
/// measures (train-mode loss without updates, batch-norm statistics
/// restored afterwards) so the log starts from the initial model.
/// On return the model holds the last epoch's weights.
TrainResult train_standalone(WCNN& model, const PairedDataset& train, const PairedDataset& val,
                             const TrainConfig& cfg, const EpochHook& hook = {});
TrainResult train_cascade(DCWCNN& model, const PairedDataset& train, const PairedDataset& val,
                          const TrainConfig& cfg, const EpochHook& hook = {});

/// Eval-mode reconstruction of one item, returned as [H,W].
Tensor reconstruct(Network& net, const PairedItem& item, const SamplingMask& mask);

MetricReport evaluate(Network& net, const PairedDataset& data);
/// Metrics of the zero-filled inputs themselves.
MetricReport evaluate_zero_filled(const PairedDataset& data);

/// CSV: epoch,train_loss,val_nmse,val_psnr,val_ssim,val_hfen.
std::string format_loss_csv(const std::vector<EpochLog>& log);

}  // namespace wrecon
