#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bfd/model.hpp"
#include "bfd/network.hpp"
#include "bfd/signal.hpp"

namespace bfd {

enum class OptimizerKind { kSgdMomentum, kAdam };
enum class Monitor { kValLoss, kValAccuracy };

struct ReduceLRConfig {
  Monitor monitor = Monitor::kValLoss;
  double factor = 0.5;
  int patience = 3;
  double min_lr = 1e-5;
  // Minimum absolute change that counts as an improvement.
  double threshold = 1e-4;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double base_lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.9;
  std::optional<ReduceLRConfig> schedule = ReduceLRConfig{};
  std::optional<Activation> activation_override;
  std::uint64_t seed = 1;
  SplitFractions fractions{};
  // Windows drawn per recording when the dataset comes from a manifest.
  std::size_t frames_per_recording = 1000;
};

// Throws InvalidArgument on out-of-range fields.
void validate(const TrainConfig& cfg);

// Flat "key=value" text; '#' starts a comment. Keys: epochs, batch_size,
// base_lr, optimizer (adam|sgd-momentum), momentum, schedule (on|off),
// monitor (val_loss|val_accuracy), factor, patience, min_lr, activation
// (tanh|relu), seed, train_frac, val_frac, test_frac, frames_per_recording.
TrainConfig parse_train_config(const std::string& text);
TrainConfig read_train_config(const std::filesystem::path& path);

// Reduce-on-plateau: after `patience` consecutive epochs without an
// improvement larger than the threshold, lr <- max(lr * factor, min_lr) and
// the counter restarts.
class ReduceLROnPlateau {
 public:
  ReduceLROnPlateau(const ReduceLRConfig& cfg, double lr);

  // Feeds one epoch's monitored metric; returns the learning rate to use next.
  double step(double metric);

  double lr() const { return lr_; }
  int bad_epochs() const { return bad_epochs_; }
  double best() const { return best_; }

 private:
  bool improved(double metric) const;

  ReduceLRConfig cfg_;
  double lr_;
  double best_;
  int bad_epochs_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0;
  double train_loss = 0;
  double train_acc = 0;
  double val_loss = 0;
  double val_acc = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double best_val_accuracy = 0;
  int best_epoch = 0;
  // Timing is informational and excluded from comparisons.
  double wall_seconds_per_epoch = 0;

  bool same_metrics(const TrainReport& other) const {
    return epochs == other.epochs && best_val_accuracy == other.best_val_accuracy && best_epoch == other.best_epoch;
  }
};

struct TrainResult {
  Architecture arch;  // after activation override
  ModelParams params; // from the best validation epoch
  TrainReport report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Mini-batch training over the dataset's train split with per-epoch
// validation. Throws EmptySplit or DivergedLoss.
TrainResult train(const Dataset& dataset, const Architecture& arch, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct Evaluation {
  double accuracy = 0;
  double mean_loss = 0;
  std::size_t count = 0;
  // confusion[true][predicted]
  std::vector<std::vector<std::size_t>> confusion;
};

Evaluation evaluate(const ModelParams& params, const Architecture& arch, std::span<const Frame> frames);
Evaluation evaluate(const ModelParams& params, const Architecture& arch, const Dataset& dataset,
                    std::span<const std::size_t> indices);

// Copies a frame into a 20x20x1 network input.
Tensor frame_to_tensor(const Frame& frame);

// Population standard deviation of consecutive val_acc differences.
double oscillation(const TrainReport& report);

struct AblationRun {
  std::string name;
  Activation activation = Activation::kTanh;
  bool schedule = false;
  TrainReport report;
  double oscillation = 0;
};

struct AblationReport {
  std::vector<AblationRun> runs;  // relu, tanh, relu+ReduceLR, tanh+ReduceLR
  DatasetSplit split;

  const AblationRun& run(Activation act, bool schedule) const;
};

// Trains the four activation/schedule combinations on identical splits and
// initialization seed.
AblationReport ablation_suite(const Dataset& dataset, const TrainConfig& base, std::uint64_t seed,
                              const std::function<void(const std::string&, const EpochRecord&)>& on_epoch = {});

std::string render_ablation(const AblationReport& report);

// Header "epoch,lr,train_loss,train_acc,val_loss,val_acc" and one row per epoch.
std::string metrics_csv(const TrainReport& report);
void write_metrics_csv(const TrainReport& report, const std::filesystem::path& path);

}  // namespace bfd
