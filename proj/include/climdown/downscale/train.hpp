#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "climdown/downscale/config.hpp"
#include "climdown/downscale/data.hpp"
#include "climdown/downscale/models.hpp"

namespace climdown::downscale {

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_loss;  // absent without a validation set
  double best = 0.0;               // running best of the selection loss
  double wall_ms = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: the initial parameters were never beaten
  bool stopped_early = false;
  std::string fault;           // non-empty if a non-finite loss aborted training
};

/// CSV columns epoch, train_loss, val_loss, best_loss, wall_ms.
void write_train_log_csv(std::ostream& os, const TrainLog& log);

struct TrainOutcome {
  TrainedModel model;  // parameters of the best epoch
  TrainLog log;
};

/// Mini-batch training with seeded shuffling. Model selection uses the validation MSE
/// (training loss when `val` is empty); the best parameters are restored at the end and,
/// if `ckpt_dir` is set, written there after every improvement. A non-finite loss stops
/// training with `log.fault` set and the last good parameters kept.
TrainOutcome train(const ArchConfig& arch, const Dataset& train_set, const Dataset& val,
                   const TrainConfig& tc, const std::filesystem::path& ckpt_dir = {});

/// Plain MSE in normalised units, inference mode.
double normalized_mse(const TrainedModel& m, const Dataset& d);

}  // namespace climdown::downscale
