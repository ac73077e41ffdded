#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "wrecon/model.hpp"
#include "wrecon/train.hpp"

namespace wrecon {

enum class RunMode { Standalone, Cascade };

/// Everything `wrecon train` needs. Paths are used as given (relative to
/// the working directory).
struct RunConfig {
  RunMode mode = RunMode::Standalone;
  WCNNConfig wcnn;
  CascadeConfig cascade;
  TrainConfig training;
  std::string manifest;
  std::string mask;        // empty: take the manifest's mask
  std::string init;        // cascade only: standalone checkpoint to start from
  std::string checkpoint;  // output, best validation PSNR
  std::string loss_log;    // output CSV, optional
  std::string report;      // output val report CSV of the best model, optional

  void validate() const;
};

/// JSON schema (every key optional, unknown keys rejected):
/// {"mode": "standalone"|"cascade",
///  "wcnn": {"levels", "block_depth", "base_channels"},
///  "cascade": {"n_cascades", "lambda" (number or "inf"), "alpha", "share_weights"},
///  "training": {"epochs", "batch_size", "lr", "seed"},
///  "paths": {"manifest", "mask", "init", "checkpoint", "loss_log", "report"}}
RunConfig parse_run_config(const std::string& json_text);
std::string format_run_config(const RunConfig& cfg);

/// Entry point of the command-line tool; returns the process exit code.
/// Progress goes to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& err);

}  // namespace wrecon
