#include "wrecon/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "wrecon/checkpoint.hpp"
#include "wrecon/data.hpp"
#include "wrecon/io_util.hpp"
#include "wrecon/kspace.hpp"
#include "wrecon/metrics.hpp"

namespace fs = std::filesystem;

namespace wrecon {

namespace {

using Json = nlohmann::json;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void reject_unknown(const Json& obj, std::initializer_list<const char*> keys, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw std::invalid_argument("config: unknown key '" + where + "." + it.key() + "'");
  }
}

double parse_lambda(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinite") return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("config: lambda must be a number or \"inf\"");
  }
  return j.get<double>();
}

std::size_t get_count(const Json& j, const char* key) {
  if (!j.at(key).is_number_integer() || j.at(key).get<long long>() < 0) {
    throw std::invalid_argument(std::string("config: '") + key + "' must be a non-negative integer");
  }
  return j.at(key).get<std::size_t>();
}

}  // namespace

void RunConfig::validate() const {
  wcnn.validate();
  cascade.validate();
  training.validate();
  if (manifest.empty()) throw std::invalid_argument("no dataset manifest given");
  if (!fs::exists(manifest)) throw std::invalid_argument("dataset manifest not found: " + manifest);
  if (!mask.empty() && !fs::exists(mask)) throw std::invalid_argument("mask not found: " + mask);
  if (checkpoint.empty()) throw std::invalid_argument("no output checkpoint path given");
  if (!init.empty()) {
    if (mode != RunMode::Cascade) throw std::invalid_argument("an init checkpoint only applies to cascade mode");
    if (!fs::exists(init)) throw std::invalid_argument("init checkpoint not found: " + init);
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    reject_unknown(j, {"mode", "wcnn", "cascade", "training", "paths"}, "config");
    if (j.contains("mode")) {
      const auto m = j["mode"].get<std::string>();
      if (m == "standalone") {
        cfg.mode = RunMode::Standalone;
      } else if (m == "cascade") {
        cfg.mode = RunMode::Cascade;
      } else {
        throw std::invalid_argument("config: mode must be \"standalone\" or \"cascade\"");
      }
    }
    if (j.contains("wcnn")) {
      const Json& w = j["wcnn"];
      reject_unknown(w, {"levels", "block_depth", "base_channels"}, "wcnn");
      if (w.contains("levels")) cfg.wcnn.levels = get_count(w, "levels");
      if (w.contains("block_depth")) cfg.wcnn.block_depth = get_count(w, "block_depth");
      if (w.contains("base_channels")) cfg.wcnn.base_channels = get_count(w, "base_channels");
    }
    if (j.contains("cascade")) {
      const Json& c = j["cascade"];
      reject_unknown(c, {"n_cascades", "lambda", "alpha", "share_weights"}, "cascade");
      if (c.contains("n_cascades")) cfg.cascade.n_cascades = get_count(c, "n_cascades");
      if (c.contains("lambda")) cfg.cascade.fidelity.lambda = parse_lambda(c["lambda"]);
      if (c.contains("alpha")) cfg.cascade.fidelity.alpha = c["alpha"].get<double>();
      if (c.contains("share_weights")) cfg.cascade.share_weights = c["share_weights"].get<bool>();
    }
    if (j.contains("training")) {
      const Json& t = j["training"];
      reject_unknown(t, {"epochs", "batch_size", "lr", "seed"}, "training");
      if (t.contains("epochs")) cfg.training.epochs = get_count(t, "epochs");
      if (t.contains("batch_size")) cfg.training.batch_size = get_count(t, "batch_size");
      if (t.contains("lr")) cfg.training.lr = t["lr"].get<float>();
      if (t.contains("seed")) cfg.training.seed = t["seed"].get<std::uint64_t>();
    }
    if (j.contains("paths")) {
      const Json& p = j["paths"];
      reject_unknown(p, {"manifest", "mask", "init", "checkpoint", "loss_log", "report"}, "paths");
      auto str = [&](const char* k, std::string& dst) {
        if (p.contains(k)) dst = p[k].get<std::string>();
      };
      str("manifest", cfg.manifest);
      str("mask", cfg.mask);
      str("init", cfg.init);
      str("checkpoint", cfg.checkpoint);
      str("loss_log", cfg.loss_log);
      str("report", cfg.report);
    }
  } catch (const Json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string format_run_config(const RunConfig& cfg) {
  Json j;
  j["mode"] = cfg.mode == RunMode::Standalone ? "standalone" : "cascade";
  j["wcnn"] = {{"levels", cfg.wcnn.levels},
               {"block_depth", cfg.wcnn.block_depth},
               {"base_channels", cfg.wcnn.base_channels}};
  Json lambda = cfg.cascade.fidelity.hard() ? Json("inf") : Json(cfg.cascade.fidelity.lambda);
  j["cascade"] = {{"n_cascades", cfg.cascade.n_cascades},
                  {"lambda", lambda},
                  {"alpha", cfg.cascade.fidelity.alpha},
                  {"share_weights", cfg.cascade.share_weights}};
  j["training"] = {{"epochs", cfg.training.epochs},
                   {"batch_size", cfg.training.batch_size},
                   {"lr", cfg.training.lr},
                   {"seed", cfg.training.seed}};
  j["paths"] = {{"manifest", cfg.manifest}, {"mask", cfg.mask},         {"init", cfg.init},
                {"checkpoint", cfg.checkpoint}, {"loss_log", cfg.loss_log}, {"report", cfg.report}};
  return j.dump(2) + "\n";
}

namespace {

Tensor load_any_image(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" ? import_png(p) : load_image_f32(p);
}

SamplingMask resolve_mask(const std::string& explicit_mask, const fs::path& manifest_path) {
  if (!explicit_mask.empty()) return load_mask(explicit_mask);
  const Manifest m = load_manifest(manifest_path);
  if (m.mask_path.empty()) throw std::invalid_argument("no mask given and the manifest records none");
  return load_mask(manifest_path.parent_path() / m.mask_path);
}

void check_divisible(const WCNNConfig& cfg, std::size_t h, std::size_t w) {
  if (h % cfg.divisor() != 0 || w % cfg.divisor() != 0) {
    throw ShapeError("image size " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by " +
                     std::to_string(cfg.divisor()) + " (2^levels)");
  }
}

// A loaded checkpoint as something that can reconstruct.
struct LoadedModel {
  std::optional<WCNN> standalone;
  std::optional<DCWCNN> cascade;

  explicit LoadedModel(const Checkpoint& ck) {
    if (ck.kind == ModelKind::Standalone) {
      standalone.emplace(wcnn_from_checkpoint(ck));
    } else {
      cascade.emplace(dcwcnn_from_checkpoint(ck));
    }
  }
  Network& net() { return standalone ? static_cast<Network&>(*standalone) : *cascade; }
  const WCNNConfig& config() const { return standalone ? standalone->config() : cascade->wcnn_config(); }
};

void put_wilcoxon_rows(std::string& out, const MetricReport& a, const MetricReport& b, double alpha) {
  std::map<std::string, const ImageMetrics*> by_id;
  for (const auto& r : b.images) by_id[r.id] = &r;
  if (a.images.size() != b.images.size()) {
    throw std::invalid_argument("paired comparison needs the same image set (" + std::to_string(a.images.size()) +
                                " vs " + std::to_string(b.images.size()) + " images)");
  }
  std::vector<const ImageMetrics*> matched;
  for (const auto& r : a.images) {
    auto it = by_id.find(r.id);
    if (it == by_id.end()) throw std::invalid_argument("paired comparison: image '" + r.id + "' missing from the other report");
    matched.push_back(it->second);
  }
  auto row = [&](const char* name, double ImageMetrics::*field) {
    std::vector<double> xa, xb;
    for (std::size_t i = 0; i < matched.size(); ++i) {
      xa.push_back(a.images[i].*field);
      xb.push_back(matched[i]->*field);
    }
    const auto w = wilcoxon_signed_rank(xa, xb, alpha);
    out += std::string(name) + "," + fmt("%.17g", w.statistic) + "," + fmt("%.17g", w.p_value) + "," +
           (w.significant ? "1" : "0") + "," + std::to_string(w.n) + "," + (w.exact ? "exact" : "normal") + "\n";
  };
  out = "metric,statistic,p_value,significant,n,method\n";
  row("nmse", &ImageMetrics::nmse);
  row("psnr", &ImageMetrics::psnr);
  row("ssim", &ImageMetrics::ssim);
  row("hfen", &ImageMetrics::hfen);
}

std::string summary(const MetricReport& r) {
  return "psnr " + fmt("%.3f", r.psnr.mean) + " +/- " + fmt("%.3f", r.psnr.std) + "  ssim " + fmt("%.4f", r.ssim.mean) +
         "  nmse " + fmt("%.5f", r.nmse.mean) + "  hfen " + fmt("%.4f", r.hfen.mean);
}

// ---- gen-phantoms ----
struct GenPhantomsArgs {
  std::size_t count = 250, size = 64;
  std::uint64_t seed = 0;
  double density = 1.0, split_ratio = 0.8;
  std::string out, mask;
};

int cmd_gen_phantoms(const GenPhantomsArgs& a, std::ostream& err) {
  if (a.size == 0 || a.size % 2 != 0) throw std::invalid_argument("--size must be a positive even number");
  if (a.count == 0) throw std::invalid_argument("--count must be >= 1");
  const auto [tr, va] = split_indices(a.count, a.split_ratio, a.seed);
  fs::create_directories(a.out);
  Manifest m;
  m.seed = a.seed;
  m.height = m.width = a.size;
  m.fine_detail_density = a.density;
  m.split_ratio = a.split_ratio;
  if (!a.mask.empty()) m.mask_path = fs::relative(fs::absolute(a.mask), fs::absolute(a.out)).generic_string();
  std::vector<Split> split(a.count, Split::Train);
  for (auto i : va) split[i] = Split::Val;
  for (std::size_t i = 0; i < a.count; ++i) {
    const Phantom p = gen_phantom(i, a.size, a.size, a.seed, a.density);
    char id[32];
    std::snprintf(id, sizeof id, "phantom_%04zu", i);
    const std::string file = std::string(id) + ".imgf";
    save_image_f32(p.image, fs::path(a.out) / file);
    m.items.push_back({id, file, split[i]});
  }
  save_manifest(m, fs::path(a.out) / "manifest.json");
  err << "wrote " << a.count << " phantoms (" << tr.size() << " train / " << va.size() << " val), " << a.size << "x"
      << a.size << ", seed " << a.seed << " -> " << (fs::path(a.out) / "manifest.json").string() << "\n";
  return 0;
}

// ---- gen-mask ----
struct GenMaskArgs {
  std::size_t height = 256, center_lines = 10;
  double accel = 5.0, sigma_frac = kDefaultSigmaFrac;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_gen_mask(const GenMaskArgs& a, std::ostream& err) {
  const SamplingMask m = generate_mask(a.height, a.accel, a.center_lines, a.sigma_frac, a.seed);
  save_mask(m, a.out);
  err << "mask: " << m.kept_count() << " of " << m.height << " rows kept (accel " << a.accel << ", seed " << a.seed
      << ") -> " << a.out << "\n";
  return 0;
}

// ---- train ----
int cmd_train(const RunConfig& cfg, std::ostream& err) {
  cfg.validate();
  const SamplingMask mask = resolve_mask(cfg.mask, cfg.manifest);
  auto [train, val] = load_dataset(cfg.manifest, mask);
  if (train.size() == 0) throw std::invalid_argument("manifest has no training items");
  if (val.size() == 0) throw std::invalid_argument("manifest has no validation items");
  check_divisible(cfg.wcnn, train.items[0].target.dim(0), train.items[0].target.dim(1));

  std::optional<Checkpoint> init;
  if (!cfg.init.empty()) init = load_checkpoint(cfg.init);

  const MetricReport zf = evaluate_zero_filled(val);
  err << "train " << train.size() << " / val " << val.size() << " images; zero-filled val " << summary(zf) << "\n";
  auto hook = [&](const EpochLog& e) {
    err << "epoch " << e.epoch << "/" << cfg.training.epochs << "  loss " << fmt("%.5f", e.train_loss) << "  val psnr "
        << fmt("%.3f", e.val_psnr.mean) << "  ssim " << fmt("%.4f", e.val_ssim.mean) << "  nmse "
        << fmt("%.5f", e.val_nmse.mean) << "  hfen " << fmt("%.4f", e.val_hfen.mean) << "\n";
    err.flush();
  };

  TrainResult result;
  MetricReport best_report;
  if (cfg.mode == RunMode::Standalone) {
    WCNN model(cfg.wcnn, cfg.training.seed);
    result = train_standalone(model, train, val, cfg.training, hook);
    WCNN best = wcnn_from_checkpoint(result.best);
    if (!cfg.report.empty()) best_report = evaluate(best, val);
  } else {
    const WCNNConfig block = init ? init->wcnn : cfg.wcnn;
    if (init && !(init->wcnn == cfg.wcnn)) {
      err << "note: using the init checkpoint's block config (levels " << block.levels << ", base "
          << block.base_channels << ")\n";
    }
    DCWCNN model = init ? DCWCNN(init_cascade_from_standalone(*init, block, cfg.cascade), cfg.cascade)
                        : DCWCNN(cfg.wcnn, cfg.cascade, cfg.training.seed);
    result = train_cascade(model, train, val, cfg.training, hook);
    DCWCNN best = dcwcnn_from_checkpoint(result.best);
    if (!cfg.report.empty()) best_report = evaluate(best, val);
  }

  save_checkpoint(result.best, cfg.checkpoint);
  save_checkpoint(result.last, cfg.checkpoint + ".last");
  if (!cfg.loss_log.empty()) write_file_atomic(cfg.loss_log, format_loss_csv(result.log));
  if (!cfg.report.empty()) save_report_csv(best_report, cfg.report);
  err << "best epoch " << result.best_epoch << " (val psnr " << fmt("%.3f", result.log[result.best_epoch].val_psnr.mean)
      << ") -> " << cfg.checkpoint << "\n";
  return 0;
}

// ---- reconstruct ----
struct ReconstructArgs {
  std::string checkpoint, mask, out;
  std::vector<std::string> inputs, targets;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& err) {
  if (!a.targets.empty() && a.targets.size() != a.inputs.size()) {
    throw std::invalid_argument("--target must be given once per --input");
  }
  const SamplingMask mask = load_mask(a.mask);
  LoadedModel model(load_checkpoint(a.checkpoint));
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const fs::path in(a.inputs[i]);
    const Tensor source = load_any_image(in);
    if (source.dim(0) != mask.height) {
      throw ShapeError(in.string() + ": height " + std::to_string(source.dim(0)) + " does not match the mask's " +
                       std::to_string(mask.height) + " rows");
    }
    check_divisible(model.config(), source.dim(0), source.dim(1));
    const PairedItem item = make_pair(in.stem().string(), source, mask);
    const Tensor recon = reconstruct(model.net(), item, mask);

    const std::string stem = (fs::path(a.out) / in.stem()).string();
    double hi = 0.0;
    for (float v : source.data()) hi = std::max(hi, static_cast<double>(v));
    if (hi <= 0.0) hi = 1.0;
    save_image_f32(recon, stem + "_recon.imgf");
    save_image_f32(item.input, stem + "_zf.imgf");
    export_png(recon, stem + "_recon.png", 0.0, hi);
    export_png(item.input, stem + "_zf.png", 0.0, hi);
    std::string line = in.string() + " -> " + stem + "_recon.{imgf,png}";
    if (!a.targets.empty()) {
      const Tensor target = load_any_image(a.targets[i]);
      if (target.shape() != recon.shape()) throw ShapeError(a.targets[i] + ": target size does not match the input");
      Tensor diff = target - recon;
      for (auto& v : diff.data()) v = std::fabs(v);
      double thi = 0.0;
      for (float v : target.data()) thi = std::max(thi, static_cast<double>(v));
      // errors are small next to the signal; show them at 5x gain
      export_png(diff, stem + "_error.png", 0.0, thi > 0.0 ? 0.2 * thi : 1.0);
      const ImageMetrics m = compute_metrics(in.stem().string(), recon, target);
      line += "  psnr " + fmt("%.3f", m.psnr) + "  ssim " + fmt("%.4f", m.ssim);
    }
    err << line << "\n";
  }
  return 0;
}

// ---- evaluate ----
struct EvaluateArgs {
  std::string checkpoint, manifest, mask, out, baseline_out, compare, wilcoxon_out, split = "val";
  double alpha = 0.05;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& err) {
  if (!fs::exists(a.manifest)) throw std::invalid_argument("dataset manifest not found: " + a.manifest);
  const SamplingMask mask = resolve_mask(a.mask, a.manifest);
  auto [train, val] = load_dataset(a.manifest, mask);
  PairedDataset data;
  if (a.split == "val") {
    data = std::move(val);
  } else if (a.split == "train") {
    data = std::move(train);
  } else {
    data = std::move(train);
    for (auto& it : val.items) data.items.push_back(std::move(it));
  }
  if (data.size() == 0) throw std::invalid_argument("no images in split '" + a.split + "'");

  std::optional<MetricReport> compare;
  if (!a.compare.empty()) compare = load_report_csv(a.compare);

  const MetricReport baseline = evaluate_zero_filled(data);
  MetricReport report;
  if (a.checkpoint.empty()) {
    report = baseline;
  } else {
    LoadedModel model(load_checkpoint(a.checkpoint));
    check_divisible(model.config(), data.items[0].target.dim(0), data.items[0].target.dim(1));
    report = evaluate(model.net(), data);
  }

  std::string wilcoxon;
  if (compare) {
    put_wilcoxon_rows(wilcoxon, report, *compare, a.alpha);
  } else if (!a.checkpoint.empty()) {
    put_wilcoxon_rows(wilcoxon, report, baseline, a.alpha);
  }

  save_report_csv(report, a.out);
  if (!a.baseline_out.empty()) save_report_csv(baseline, a.baseline_out);
  if (!a.wilcoxon_out.empty() && !wilcoxon.empty()) write_file_atomic(a.wilcoxon_out, wilcoxon);

  err << "zero-filled: " << summary(baseline) << "\n";
  if (!a.checkpoint.empty()) err << "model:       " << summary(report) << "\n";
  if (!wilcoxon.empty()) err << "paired signed-rank vs " << (compare ? a.compare : "zero-filled") << ":\n" << wilcoxon;
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& err) {
  CLI::App app{"Wavelet CNN MRI reconstruction toolkit"};
  app.require_subcommand(1);
  std::ostringstream out;

  GenPhantomsArgs gp;
  auto* sub_gp = app.add_subcommand("gen-phantoms", "Generate synthetic phantoms and a dataset manifest");
  sub_gp->add_option("--count", gp.count, "number of phantoms")->capture_default_str();
  sub_gp->add_option("--size", gp.size, "image side length (even)")->capture_default_str();
  sub_gp->add_option("--seed", gp.seed, "generator seed")->capture_default_str();
  sub_gp->add_option("--density", gp.density, "fine-detail density")->capture_default_str();
  sub_gp->add_option("--split-ratio", gp.split_ratio, "fraction of items assigned to training")->capture_default_str();
  sub_gp->add_option("--mask", gp.mask, "mask file to record in the manifest");
  sub_gp->add_option("--out", gp.out, "output directory")->required();

  GenMaskArgs gm;
  auto* sub_gm = app.add_subcommand("gen-mask", "Generate a Cartesian undersampling mask");
  sub_gm->add_option("--height", gm.height, "number of k-space rows")->capture_default_str();
  sub_gm->add_option("--accel", gm.accel, "acceleration factor")->capture_default_str();
  sub_gm->add_option("--center-lines", gm.center_lines, "fully sampled lines around DC")->capture_default_str();
  sub_gm->add_option("--sigma-frac", gm.sigma_frac, "Gaussian width as a fraction of height")->capture_default_str();
  sub_gm->add_option("--seed", gm.seed, "mask seed")->capture_default_str();
  sub_gm->add_option("--out", gm.out, "output mask file")->required();

  std::string config_path, mode, lambda_str;
  RunConfig flags;
  bool share_weights = false;
  auto* sub_tr = app.add_subcommand("train", "Train a standalone or cascaded model");
  sub_tr->add_option("--config", config_path, "JSON run config");
  auto* o_mode = sub_tr->add_option("--mode", mode, "standalone or cascade")->check(CLI::IsMember({"standalone", "cascade"}));
  auto* o_manifest = sub_tr->add_option("--manifest", flags.manifest, "dataset manifest");
  auto* o_mask = sub_tr->add_option("--mask", flags.mask, "mask file (default: the manifest's)");
  auto* o_init = sub_tr->add_option("--init", flags.init, "standalone checkpoint for cascade initialization");
  auto* o_ckpt = sub_tr->add_option("--checkpoint", flags.checkpoint, "output checkpoint");
  auto* o_log = sub_tr->add_option("--loss-log", flags.loss_log, "output loss curve CSV");
  auto* o_report = sub_tr->add_option("--report", flags.report, "output validation report CSV");
  auto* o_epochs = sub_tr->add_option("--epochs", flags.training.epochs);
  auto* o_batch = sub_tr->add_option("--batch-size", flags.training.batch_size);
  auto* o_lr = sub_tr->add_option("--lr", flags.training.lr);
  auto* o_seed = sub_tr->add_option("--seed", flags.training.seed);
  auto* o_levels = sub_tr->add_option("--levels", flags.wcnn.levels);
  auto* o_depth = sub_tr->add_option("--block-depth", flags.wcnn.block_depth);
  auto* o_base = sub_tr->add_option("--base-channels", flags.wcnn.base_channels);
  auto* o_nc = sub_tr->add_option("--n-cascades", flags.cascade.n_cascades);
  auto* o_lambda = sub_tr->add_option("--lambda", lambda_str, "data-fidelity weight, or inf");
  auto* o_share = sub_tr->add_flag("--share-weights", share_weights);

  ReconstructArgs rc;
  auto* sub_rc = app.add_subcommand("reconstruct", "Reconstruct retrospectively undersampled images");
  sub_rc->add_option("--checkpoint", rc.checkpoint)->required();
  sub_rc->add_option("--mask", rc.mask)->required();
  sub_rc->add_option("--input", rc.inputs, "fully sampled source images (IMGF or PNG)")->required();
  sub_rc->add_option("--target", rc.targets, "reference images for error maps, one per input");
  sub_rc->add_option("--out", rc.out, "output directory")->required();

  EvaluateArgs ev;
  auto* sub_ev = app.add_subcommand("evaluate", "Compute per-image metrics over a dataset");
  sub_ev->add_option("--checkpoint", ev.checkpoint, "model checkpoint (omit to score the zero-filled inputs)");
  sub_ev->add_option("--manifest", ev.manifest)->required();
  sub_ev->add_option("--mask", ev.mask, "mask file (default: the manifest's)");
  sub_ev->add_option("--split", ev.split)->check(CLI::IsMember({"val", "train", "all"}))->capture_default_str();
  sub_ev->add_option("--out", ev.out, "output report CSV")->required();
  sub_ev->add_option("--baseline-out", ev.baseline_out, "zero-filled baseline report CSV");
  sub_ev->add_option("--compare", ev.compare, "other report CSV for a paired signed-rank test");
  sub_ev->add_option("--wilcoxon-out", ev.wilcoxon_out, "signed-rank results CSV");
  sub_ev->add_option("--alpha", ev.alpha)->capture_default_str();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code;
  }

  try {
    if (*sub_gp) return cmd_gen_phantoms(gp, err);
    if (*sub_gm) return cmd_gen_mask(gm, err);
    if (*sub_tr) {
      RunConfig cfg;
      if (!config_path.empty()) cfg = parse_run_config(read_file(config_path));
      if (*o_mode) cfg.mode = mode == "cascade" ? RunMode::Cascade : RunMode::Standalone;
      if (*o_manifest) cfg.manifest = flags.manifest;
      if (*o_mask) cfg.mask = flags.mask;
      if (*o_init) cfg.init = flags.init;
      if (*o_ckpt) cfg.checkpoint = flags.checkpoint;
      if (*o_log) cfg.loss_log = flags.loss_log;
      if (*o_report) cfg.report = flags.report;
      if (*o_epochs) cfg.training.epochs = flags.training.epochs;
      if (*o_batch) cfg.training.batch_size = flags.training.batch_size;
      if (*o_lr) cfg.training.lr = flags.training.lr;
      if (*o_seed) cfg.training.seed = flags.training.seed;
      if (*o_levels) cfg.wcnn.levels = flags.wcnn.levels;
      if (*o_depth) cfg.wcnn.block_depth = flags.wcnn.block_depth;
      if (*o_base) cfg.wcnn.base_channels = flags.wcnn.base_channels;
      if (*o_nc) cfg.cascade.n_cascades = flags.cascade.n_cascades;
      if (*o_lambda) {
        cfg.cascade.fidelity.lambda =
            lambda_str == "inf" ? std::numeric_limits<double>::infinity() : std::stod(lambda_str);
      }
      if (*o_share) cfg.cascade.share_weights = share_weights;
      return cmd_train(cfg, err);
    }
    if (*sub_rc) return cmd_reconstruct(rc, err);
    if (*sub_ev) return cmd_evaluate(ev, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace wrecon
