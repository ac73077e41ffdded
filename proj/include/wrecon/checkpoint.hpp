#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "wrecon/model.hpp"

namespace wrecon {

enum class ModelKind { Standalone, Cascade };

/// Serializable snapshot of a model: architecture, weights, batch-norm
/// statistics, Adam moments and the training position.
struct Checkpoint {
  ModelKind kind = ModelKind::Standalone;
  WCNNConfig wcnn;
  CascadeConfig cascade;  // meaningful for ModelKind::Cascade
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
  std::int64_t optimizer_step = 0;
  /// Parameters, then "<name>.adam_m" / "<name>.adam_v", then buffers.
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(const std::string& bytes);
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

Checkpoint make_checkpoint(WCNN& model, std::uint64_t seed, std::int64_t epoch);
Checkpoint make_checkpoint(DCWCNN& model, std::uint64_t seed, std::int64_t epoch);

/// Rebuilds a model and copies every tensor in; missing, extra or
/// mis-shaped tensors are rejected.
WCNN wcnn_from_checkpoint(const Checkpoint& ck);
DCWCNN dcwcnn_from_checkpoint(const Checkpoint& ck);

/// Independent deep copies of a standalone model, one per cascade stage
/// (one in total when weights are shared). Adam state starts fresh.
std::vector<WCNN> init_cascade_from_standalone(const Checkpoint& standalone, const WCNNConfig& expected,
                                               const CascadeConfig& cascade);

}  // namespace wrecon
