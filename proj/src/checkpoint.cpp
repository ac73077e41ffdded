#include "wrecon/checkpoint.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "json.hpp"
#include "wrecon/io_util.hpp"

namespace wrecon {

namespace {

constexpr char kMagic[4] = {'W', 'C', 'N', 'N'};

using Json = nlohmann::json;

Json fidelity_json(const FidelityConfig& f) {
  Json j;
  if (f.hard()) {
    j["lambda"] = "inf";
  } else {
    j["lambda"] = f.lambda;
  }
  j["alpha"] = f.alpha;
  return j;
}

FidelityConfig fidelity_from_json(const Json& j) {
  FidelityConfig f;
  const Json& l = j.at("lambda");
  if (l.is_string()) {
    if (l.get<std::string>() != "inf") throw FormatError("checkpoint: bad lambda " + l.dump());
    f.lambda = std::numeric_limits<double>::infinity();
  } else {
    f.lambda = l.get<double>();
  }
  f.alpha = j.value("alpha", 0.0);
  return f;
}

struct Slot {
  std::string name;
  Tensor* tensor;
};

// Every tensor a checkpoint carries for one block, in file order.
void collect_slots(WCNN& block, const std::string& prefix, std::vector<Slot>& out) {
  auto params = block.parameters();
  for (auto* p : params) out.push_back({prefix + p->name, &p->value()});
  for (auto* p : params) {
    out.push_back({prefix + p->name + ".adam_m", &p->m});
    out.push_back({prefix + p->name + ".adam_v", &p->v});
  }
  for (auto& [name, t] : block.buffers()) out.push_back({prefix + name, t});
}

std::string block_prefix(std::size_t i) { return "block" + std::to_string(i) + "."; }

std::int64_t shared_step(const std::vector<Parameter*>& params) {
  return params.empty() ? 0 : params.front()->step;
}

void restore(const Checkpoint& ck, std::vector<Slot>& slots, const std::vector<Parameter*>& params) {
  if (slots.size() != ck.tensors.size()) {
    throw FormatError("checkpoint: expected " + std::to_string(slots.size()) + " tensors, file has " +
                      std::to_string(ck.tensors.size()));
  }
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ck.tensors) {
    if (!by_name.emplace(name, &t).second) throw FormatError("checkpoint: duplicate tensor " + name);
  }
  for (auto& s : slots) {
    auto it = by_name.find(s.name);
    if (it == by_name.end()) throw FormatError("checkpoint: missing tensor " + s.name);
    if (it->second->shape() != s.tensor->shape()) {
      throw FormatError("checkpoint: tensor " + s.name + " has shape " + to_string(it->second->shape()) +
                        ", model expects " + to_string(s.tensor->shape()));
    }
  }
  for (auto& s : slots) *s.tensor = *by_name.at(s.name);
  for (auto* p : params) {
    p->step = ck.optimizer_step;
    p->node->zero_grad();
  }
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

std::string encode_checkpoint(const Checkpoint& ck) {
  Json cfg;
  cfg["kind"] = ck.kind == ModelKind::Standalone ? "standalone" : "cascade";
  cfg["wcnn"] = {{"levels", ck.wcnn.levels},
                 {"block_depth", ck.wcnn.block_depth},
                 {"base_channels", ck.wcnn.base_channels},
                 {"input_channels", ck.wcnn.input_channels}};
  cfg["cascade"] = {{"n_cascades", ck.cascade.n_cascades},
                    {"share_weights", ck.cascade.share_weights},
                    {"fidelity", fidelity_json(ck.cascade.fidelity)}};
  cfg["seed"] = ck.seed;
  cfg["epoch"] = ck.epoch;
  cfg["optimizer_step"] = ck.optimizer_step;
  cfg["num_tensors"] = ck.tensors.size();
  const std::string blob = cfg.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(blob.size()));
  out += blob;
  for (const auto& [name, t] : ck.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    put_f32s(out, t.data());
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  ByteReader r(bytes, "checkpoint");
  if (r.take(4) != std::string_view(kMagic, 4)) throw FormatError("checkpoint: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t blob_len = r.u32();
  Json cfg;
  try {
    cfg = Json::parse(r.take(blob_len));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: bad config blob: ") + e.what());
  }

  Checkpoint ck;
  std::size_t n_tensors = 0;
  try {
    const std::string kind = cfg.at("kind").get<std::string>();
    if (kind == "standalone") {
      ck.kind = ModelKind::Standalone;
    } else if (kind == "cascade") {
      ck.kind = ModelKind::Cascade;
    } else {
      throw FormatError("checkpoint: unknown kind " + kind);
    }
    const Json& w = cfg.at("wcnn");
    ck.wcnn.levels = w.at("levels").get<std::size_t>();
    ck.wcnn.block_depth = w.at("block_depth").get<std::size_t>();
    ck.wcnn.base_channels = w.at("base_channels").get<std::size_t>();
    ck.wcnn.input_channels = w.at("input_channels").get<std::size_t>();
    const Json& c = cfg.at("cascade");
    ck.cascade.n_cascades = c.at("n_cascades").get<std::size_t>();
    ck.cascade.share_weights = c.at("share_weights").get<bool>();
    ck.cascade.fidelity = fidelity_from_json(c.at("fidelity"));
    ck.seed = cfg.at("seed").get<std::uint64_t>();
    ck.epoch = cfg.at("epoch").get<std::int64_t>();
    ck.optimizer_step = cfg.at("optimizer_step").get<std::int64_t>();
    n_tensors = cfg.at("num_tensors").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: bad config field: ") + e.what());
  }
  try {
    ck.wcnn.validate();
    ck.cascade.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }

  for (std::size_t i = 0; i < n_tensors; ++i) {
    std::string name(r.take(r.u32()));
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) throw FormatError("checkpoint: tensor " + name + " has bad rank");
    Shape shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = r.u32();
      if (d == 0) throw FormatError("checkpoint: tensor " + name + " has a zero extent");
      count *= d;
    }
    if (count * 4 > r.remaining()) throw FormatError("checkpoint: truncated payload of " + name);
    Tensor t(shape);
    r.f32s(t.data());
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (!r.done()) throw FormatError("checkpoint: trailing bytes after last tensor");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Checkpoint make_checkpoint(WCNN& model, std::uint64_t seed, std::int64_t epoch) {
  Checkpoint ck;
  ck.kind = ModelKind::Standalone;
  ck.wcnn = model.config();
  ck.cascade.n_cascades = 1;
  ck.seed = seed;
  ck.epoch = epoch;
  ck.optimizer_step = shared_step(model.parameters());
  std::vector<Slot> slots;
  collect_slots(model, "", slots);
  for (auto& s : slots) ck.tensors.emplace_back(s.name, *s.tensor);
  return ck;
}

Checkpoint make_checkpoint(DCWCNN& model, std::uint64_t seed, std::int64_t epoch) {
  Checkpoint ck;
  ck.kind = ModelKind::Cascade;
  ck.wcnn = model.wcnn_config();
  ck.cascade = model.cascade();
  ck.seed = seed;
  ck.epoch = epoch;
  ck.optimizer_step = shared_step(model.parameters());
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < model.blocks().size(); ++i) collect_slots(model.blocks()[i], block_prefix(i), slots);
  for (auto& s : slots) ck.tensors.emplace_back(s.name, *s.tensor);
  return ck;
}

WCNN wcnn_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::Standalone) throw std::invalid_argument("checkpoint holds a cascade, not a standalone model");
  WCNN model(ck.wcnn, ck.seed);
  std::vector<Slot> slots;
  collect_slots(model, "", slots);
  restore(ck, slots, model.parameters());
  return model;
}

DCWCNN dcwcnn_from_checkpoint(const Checkpoint& ck) {
  if (ck.kind != ModelKind::Cascade) throw std::invalid_argument("checkpoint holds a standalone model, not a cascade");
  DCWCNN model(ck.wcnn, ck.cascade, ck.seed);
  std::vector<Slot> slots;
  for (std::size_t i = 0; i < model.blocks().size(); ++i) collect_slots(model.blocks()[i], block_prefix(i), slots);
  restore(ck, slots, model.parameters());
  return model;
}

std::vector<WCNN> init_cascade_from_standalone(const Checkpoint& standalone, const WCNNConfig& expected,
                                               const CascadeConfig& cascade) {
  cascade.validate();
  if (standalone.kind != ModelKind::Standalone) {
    throw std::invalid_argument("cascade initialization needs a standalone checkpoint");
  }
  if (!(standalone.wcnn == expected)) {
    throw std::invalid_argument("standalone checkpoint config (levels " + std::to_string(standalone.wcnn.levels) +
                                ", depth " + std::to_string(standalone.wcnn.block_depth) + ", base " +
                                std::to_string(standalone.wcnn.base_channels) +
                                ") does not match the cascade's block config");
  }
  const WCNN source = wcnn_from_checkpoint(standalone);
  const std::size_t n = cascade.share_weights ? 1 : cascade.n_cascades;
  std::vector<WCNN> blocks;
  blocks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    WCNN copy = source;  // Parameter copies allocate fresh leaves
    for (auto* p : copy.parameters()) {
      p->m.fill(0.0f);
      p->v.fill(0.0f);
      p->step = 0;
    }
    blocks.push_back(std::move(copy));
  }
  return blocks;
}

}  // namespace wrecon
