#pragma once

#include <string>
#include <vector>

#include "feasc/datasets.hpp"
#include "feasc/frameworks.hpp"
#include "feasc/trainer.hpp"

namespace feasc {

enum class Protocol { linear, finetune };
std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& s);

struct EvalConfig {
  std::string checkpoint;  // empty: randomly initialised backbone
  Protocol protocol = Protocol::linear;
  std::string dataset;
  double fraction = 1.0;
  int epochs = 30;
  double lr = 0.1;
  std::uint64_t seed = 0;
  int batch_size = 64;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int resolution = 32;

  void validate() const;
  std::string to_json() const;
  static EvalConfig from_json(const std::string& text);
};

struct EvalResult {
  double top1 = 0;
  std::vector<int> predictions;  // test split order
};

/// Backbone output pooled over space, eval-mode batch norm: (N, C).
Tensor extract_features(Sequential& backbone, const std::vector<Tensor>& views, int batch_size);

/// Central crops of every image at the given resolution.
std::vector<Tensor> center_views(const LabeledImages& data, int resolution);

/// Trains batch-norm standardisation (no affine) + linear classifier on frozen
/// pooled backbone features of random-resized-crop/flip views; reports top-1
/// on centre crops of the test set. The backbone is never modified.
EvalResult linear_probe(const Sequential& backbone, const EncoderSpec& spec, const LabeledImages& train,
                        const LabeledImages& test, const EvalConfig& cfg);

/// As linear_probe with every parameter trainable. With epochs > 0 the
/// backbone weights must change; otherwise a std::logic_error is thrown.
EvalResult finetune(const Sequential& backbone, const EncoderSpec& spec, const LabeledImages& train,
                    const LabeledImages& test, const EvalConfig& cfg);

/// Loads checkpoint and dataset, subsets the training split, runs the protocol.
EvalResult evaluate(const EvalConfig& cfg);

/// Top-1 predictions of a classifier head on centre crops, evaluated in chunks
/// of batch_size.
std::vector<int> predict(Sequential& backbone, Sequential& head, const std::vector<Tensor>& views, int batch_size);

/// Mean softmax cross-entropy; writes dL/dlogits when grad is given.
double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad = nullptr);

/// Per-dimension standard deviation of L2-normalised projector outputs on
/// centre crops (eval mode).
std::vector<double> embedding_std(SiameseModel& model, const std::vector<Tensor>& views, int batch_size);

struct AblationRow {
  Framework framework = Framework::simsiam;
  Strategy strategy = Strategy::feasc;
  double lambda = 0;
  double fraction = 1.0;
  std::uint64_t seed = 0;
  double top1 = 0;
  double median_step_seconds = 0;
  std::vector<MetricsRow> metrics;
};

struct ExperimentData {
  LabeledImages train, test;
};

ExperimentData load_experiment_data(const std::string& dataset);

/// Pre-trains under the strategy, then linear-probes the backbone.
AblationRow run_ablation(const TrainConfig& base, Strategy strategy, const EvalConfig& probe, const ExperimentData& data,
                         const std::string& out_dir = "");

struct SweepResult {
  std::vector<AblationRow> rows;
  std::vector<std::string> warnings;
};

/// One pre-train + probe per distinct lambda (duplicates dropped with a
/// warning). With out_dir writes sweep.csv and sweep.svg.
SweepResult sweep_lambda(const TrainConfig& base, std::vector<double> grid, const EvalConfig& probe,
                         const ExperimentData& data, const std::string& out_dir = "");

/// Header "method,strategy,fraction,lambda,seed,top1".
void write_results_csv(const std::string& path, const std::vector<AblationRow>& rows);

struct HeatmapViews {
  Tensor views[2];
  ResponseMap response[2];
  SuppressionMask mask[2];
  std::vector<std::string> files;
};

/// Response maps of the final encoder stage for two sampled views of one
/// image, written as normalised grey PNGs (upsampled to view size), mask
/// overlays at eta, and raw grids.
HeatmapViews export_heatmap(Sequential& backbone, const Tensor& image, const AugmentPolicy& policy, std::uint64_t seed,
                            double eta, const std::string& out_dir);

/// (M - min) / (max - min); all zeros for a constant map.
Tensor normalized_response(const ResponseMap& m);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

/// Minimal SVG line chart.
void write_line_plot_svg(const std::string& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace feasc
