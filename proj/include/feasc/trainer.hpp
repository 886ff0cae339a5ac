#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "feasc/augment.hpp"
#include "feasc/datasets.hpp"
#include "feasc/frameworks.hpp"
#include "feasc/optim.hpp"

namespace feasc {

struct TrainConfig {
  Framework mode = Framework::simsiam;
  int epochs = 30;
  int batch_size = 64;
  double base_lr = 0.2;
  int warmup_epochs = 6;
  double momentum = 0.5;
  double weight_decay = 1e-4;
  double alpha = 0.2;
  int beta = 20;
  double lambda = 1.0;
  double tau = 0.996;
  std::uint64_t seed = 0;
  std::string dataset;  // manifest file or class-per-directory root
  Strategy strategy = Strategy::feasc;
  bool symmetric_suppression = false;
  bool suppressed_through_predictor = true;
  bool suppressed_diagnostics = true;  // none strategy: log d_supp and mse_supp anyway
  int checkpoint_every = 10;
  EncoderSpec encoder;
  HeadSpec head;
  AugmentPolicy augment;

  void validate() const;
  std::string to_json() const;
  /// Partial objects keep defaults for absent keys; unknown keys are rejected.
  static TrainConfig from_json(const std::string& text);
  static TrainConfig load(const std::string& path);
};

struct MetricsRow {
  int epoch = 0;
  long step = 0;
  double eta = 0;
  double lr = 0;
  LossReport loss;
  double step_seconds = 0;  // forward, backward and update of this step
  double wall_clock = 0;    // seconds since training started
};

/// Column order of metrics.csv.
const std::vector<std::string>& metrics_columns();
std::string metrics_csv_row(const MetricsRow& row);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, std::string diagnostics_path)
      : std::runtime_error(what), diagnostics_path_(std::move(diagnostics_path)) {}
  const std::string& diagnostics_path() const { return diagnostics_path_; }

 private:
  std::string diagnostics_path_;
};

struct TrainHooks {
  /// Called after every optimizer step (and the target update in BYOL mode).
  std::function<void(const MetricsRow&, const SiameseModel&)> on_step;
  /// Called with the loss report before the finiteness check; may alter it.
  std::function<void(MetricsRow&)> inspect_loss;
};

struct TrainResult {
  SiameseModel model;
  std::vector<MetricsRow> metrics;
  std::vector<std::string> checkpoints;  // in write order; the last is the final one
};

/// Training split of the configured dataset, decoded into memory.
LabeledImages load_training_data(const TrainConfig& config);

/// Runs pre-training. With a non-empty out_dir writes metrics.csv,
/// checkpoints/epoch_NNNN.ckpt every checkpoint_every epochs and
/// checkpoints/final.ckpt. epochs == 0 writes only the initial final.ckpt.
/// A non-finite loss aborts with TrainingError; its diagnostics are written
/// to out_dir/failure.json.
TrainResult train(const TrainConfig& config, const LabeledImages& data, const std::string& out_dir,
                  const TrainHooks& hooks = {});

}  // namespace feasc
