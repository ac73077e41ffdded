#include "wrecon/train.hpp"

#include <charconv>
#include <numeric>
#include <stdexcept>

#include "wrecon/rng.hpp"

namespace wrecon {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0.0f)) throw std::invalid_argument("lr must be > 0");
}

namespace {

struct Batch {
  Tensor inputs;   // [B,1,H,W]
  Tensor targets;  // [B,1,H,W]
  std::vector<ComplexGrid> ys;
};

Batch gather(const PairedDataset& data, std::span<const std::size_t> idx) {
  const std::size_t h = data.items[idx[0]].target.dim(0), w = data.items[idx[0]].target.dim(1);
  Batch b{Tensor({idx.size(), 1, h, w}), Tensor({idx.size(), 1, h, w}), {}};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const PairedItem& it = data.items[idx[i]];
    if (it.target.shape() != Shape{h, w} || it.input.shape() != Shape{h, w}) {
      throw ShapeError("training set mixes image sizes: " + it.id);
    }
    std::copy(it.input.data().begin(), it.input.data().end(), b.inputs.raw() + i * h * w);
    std::copy(it.target.data().begin(), it.target.data().end(), b.targets.raw() + i * h * w);
    b.ys.push_back(it.measurements);
  }
  return b;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(hash_combine(seed, 0xE90C0000ULL + epoch));
  rng.shuffle(order);
  return order;
}

// One pass over the training set; returns the per-image mean loss.
double run_epoch(Network& net, const PairedDataset& data, const TrainConfig& cfg, std::size_t epoch, bool update) {
  const auto order = epoch_order(data.size(), cfg.seed, epoch);
  auto params = net.parameters();
  AdamConfig adam;
  adam.lr = cfg.lr;
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.batch_size);
    const Batch b = gather(data, std::span(order).subspan(start, end - start));
    if (update) {
      Var loss = mse_loss(net.forward(constant(b.inputs), b.ys, data.mask, Mode::Train), b.targets);
      backward(loss);
      adam_step(params, adam);
      total += static_cast<double>(loss->value[0]) * static_cast<double>(end - start);
    } else {
      NoGradGuard guard;
      Var loss = mse_loss(net.forward(constant(b.inputs), b.ys, data.mask, Mode::Train), b.targets);
      total += static_cast<double>(loss->value[0]) * static_cast<double>(end - start);
    }
  }
  return total / static_cast<double>(data.size());
}

template <class Model>
TrainResult train_impl(Model& model, const PairedDataset& train, const PairedDataset& val, const TrainConfig& cfg,
                       const EpochHook& hook) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("training set is empty");
  if (val.size() == 0) throw std::invalid_argument("validation set is empty");

  TrainResult result;
  double best_psnr = -std::numeric_limits<double>::infinity();
  for (std::size_t epoch = 0; epoch <= cfg.epochs; ++epoch) {
    EpochLog entry;
    entry.epoch = epoch;
    if (epoch == 0) {
      std::vector<Tensor> saved;
      for (auto& [name, t] : model.buffers()) saved.push_back(*t);
      entry.train_loss = run_epoch(model, train, cfg, epoch, false);
      std::size_t i = 0;
      for (auto& [name, t] : model.buffers()) *t = saved[i++];
    } else {
      entry.train_loss = run_epoch(model, train, cfg, epoch, true);
    }
    const MetricReport rep = evaluate(model, val);
    entry.val_nmse = rep.nmse;
    entry.val_psnr = rep.psnr;
    entry.val_ssim = rep.ssim;
    entry.val_hfen = rep.hfen;
    result.log.push_back(entry);
    if (rep.psnr.mean > best_psnr) {
      best_psnr = rep.psnr.mean;
      result.best = make_checkpoint(model, cfg.seed, static_cast<std::int64_t>(epoch));
      result.best_epoch = epoch;
    }
    if (hook) hook(entry);
  }
  result.last = make_checkpoint(model, cfg.seed, static_cast<std::int64_t>(cfg.epochs));
  return result;
}

void put_number(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

}  // namespace

TrainResult train_standalone(WCNN& model, const PairedDataset& train, const PairedDataset& val,
                             const TrainConfig& cfg, const EpochHook& hook) {
  return train_impl(model, train, val, cfg, hook);
}

TrainResult train_cascade(DCWCNN& model, const PairedDataset& train, const PairedDataset& val,
                          const TrainConfig& cfg, const EpochHook& hook) {
  return train_impl(model, train, val, cfg, hook);
}

Tensor reconstruct(Network& net, const PairedItem& item, const SamplingMask& mask) {
  NoGradGuard guard;
  const std::size_t h = item.input.dim(0), w = item.input.dim(1);
  Var x = constant(item.input.reshaped({1, 1, h, w}));
  return net.forward(x, std::span(&item.measurements, 1), mask, Mode::Eval)->value.reshaped({h, w});
}

MetricReport evaluate(Network& net, const PairedDataset& data) {
  std::vector<ImageMetrics> rows;
  rows.reserve(data.size());
  for (const auto& it : data.items) rows.push_back(compute_metrics(it.id, reconstruct(net, it, data.mask), it.target));
  return MetricReport::from_images(std::move(rows));
}

MetricReport evaluate_zero_filled(const PairedDataset& data) {
  std::vector<ImageMetrics> rows;
  rows.reserve(data.size());
  for (const auto& it : data.items) rows.push_back(compute_metrics(it.id, it.input, it.target));
  return MetricReport::from_images(std::move(rows));
}

std::string format_loss_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_nmse,val_psnr,val_ssim,val_hfen\n";
  for (const auto& e : log) {
    out += std::to_string(e.epoch);
    for (double v : {e.train_loss, e.val_nmse.mean, e.val_psnr.mean, e.val_ssim.mean, e.val_hfen.mean}) {
      out += ',';
      put_number(out, v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace wrecon
