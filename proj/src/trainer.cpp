#include "feasc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "feasc/checkpoint.hpp"
#include "feasc/config_json.hpp"

namespace fs = std::filesystem;

namespace feasc {

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (warmup_epochs < 0 || (epochs > 0 && warmup_epochs >= epochs))
    throw ValidationError("warmup_epochs must be smaller than epochs");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (!(base_lr >= 0) || !(lambda >= 0) || !(weight_decay >= 0) || !(momentum >= 0))
    throw ValidationError("rates must be non-negative");
  if (!(tau >= 0 && tau <= 1)) throw ValidationError("tau must be in [0, 1]");
  if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be >= 1");
  RampSchedule{alpha, beta}.validate();
  SgdConfig{momentum, weight_decay}.validate();
  encoder.validate();
  head.validate();
  augment.validate();
}

std::string TrainConfig::to_json() const {
  Json j;
  j["mode"] = to_string(mode);
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["base_lr"] = base_lr;
  j["warmup_epochs"] = warmup_epochs;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["alpha"] = alpha;
  j["beta"] = beta;
  j["lambda"] = lambda;
  j["tau"] = tau;
  j["seed"] = seed;
  j["dataset"] = dataset;
  j["strategy"] = to_string(strategy);
  j["symmetric_suppression"] = symmetric_suppression;
  j["suppressed_through_predictor"] = suppressed_through_predictor;
  j["suppressed_diagnostics"] = suppressed_diagnostics;
  j["checkpoint_every"] = checkpoint_every;
  j["encoder"] = feasc::to_json(encoder);
  j["head"] = feasc::to_json(head);
  j["augment"] = feasc::to_json(augment);
  return j.dump(2) + "\n";
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  require_known_keys(j,
                     {"mode", "epochs", "batch_size", "base_lr", "warmup_epochs", "momentum", "weight_decay", "alpha",
                      "beta", "lambda", "tau", "seed", "dataset", "strategy", "symmetric_suppression",
                      "suppressed_through_predictor", "suppressed_diagnostics", "checkpoint_every", "encoder", "head", "augment"},
                     "config");
  TrainConfig c;
  const std::string w = "config";
  std::string mode = to_string(c.mode), strategy = to_string(c.strategy);
  read_field(j, "mode", mode, w);
  read_field(j, "strategy", strategy, w);
  c.mode = parse_framework(mode);
  c.strategy = parse_strategy(strategy);
  read_field(j, "epochs", c.epochs, w);
  read_field(j, "batch_size", c.batch_size, w);
  read_field(j, "base_lr", c.base_lr, w);
  read_field(j, "warmup_epochs", c.warmup_epochs, w);
  read_field(j, "momentum", c.momentum, w);
  read_field(j, "weight_decay", c.weight_decay, w);
  read_field(j, "alpha", c.alpha, w);
  read_field(j, "beta", c.beta, w);
  read_field(j, "lambda", c.lambda, w);
  read_field(j, "tau", c.tau, w);
  read_field(j, "seed", c.seed, w);
  read_field(j, "dataset", c.dataset, w);
  read_field(j, "symmetric_suppression", c.symmetric_suppression, w);
  read_field(j, "suppressed_through_predictor", c.suppressed_through_predictor, w);
  read_field(j, "suppressed_diagnostics", c.suppressed_diagnostics, w);
  read_field(j, "checkpoint_every", c.checkpoint_every, w);
  if (j.contains("encoder")) from_json_strict(j["encoder"], c.encoder);
  if (j.contains("head")) from_json_strict(j["head"], c.head);
  if (j.contains("augment")) from_json_strict(j["augment"], c.augment);
  c.validate();
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path, "cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> columns{"epoch",  "step",     "eta",      "lr",           "d_orig",
                                                "d_supp", "lambda",   "total",    "mse_orig",     "mse_supp",
                                                "step_seconds", "wall_clock"};
  return columns;
}

std::string metrics_csv_row(const MetricsRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f,%.6f", r.epoch, r.step,
                r.eta, r.lr, r.loss.d_orig, r.loss.d_supp, r.loss.lambda, r.loss.total, r.loss.mse_orig,
                r.loss.mse_supp, r.step_seconds, r.wall_clock);
  return buf;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path, "cannot open metrics log");
  std::string line;
  std::getline(in, line);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    MetricsRow r;
    if (std::sscanf(line.c_str(), "%d,%ld,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.epoch, &r.step, &r.eta, &r.lr,
                    &r.loss.d_orig, &r.loss.d_supp, &r.loss.lambda, &r.loss.total, &r.loss.mse_orig,
                    &r.loss.mse_supp, &r.step_seconds, &r.wall_clock) != 12)
      throw IngestionError(path, "malformed metrics row: " + line);
    rows.push_back(r);
  }
  return rows;
}

LabeledImages load_training_data(const TrainConfig& config) {
  if (config.dataset.empty()) throw ValidationError("config.dataset is not set");
  const DatasetManifest m =
      fs::is_directory(config.dataset) ? build_manifest(config.dataset) : DatasetManifest::load(config.dataset);
  return load_split(m, "train");
}

namespace {

bool finite_report(const LossReport& r, bool supp_logged) {
  return std::isfinite(r.d_orig) && std::isfinite(r.total) && std::isfinite(r.mse_orig) &&
         (!supp_logged || (std::isfinite(r.d_supp) && std::isfinite(r.mse_supp)));
}

std::string write_failure(const std::string& out_dir, const MetricsRow& row) {
  if (out_dir.empty()) return "";
  Json j;
  j["error"] = "non-finite loss";
  j["epoch"] = row.epoch;
  j["step"] = row.step;
  j["eta"] = row.eta;
  j["lr"] = row.lr;
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(std::to_string(v)); };
  j["d_orig"] = num(row.loss.d_orig);
  j["d_supp"] = num(row.loss.d_supp);
  j["total"] = num(row.loss.total);
  j["mse_orig"] = num(row.loss.mse_orig);
  j["mse_supp"] = num(row.loss.mse_supp);
  const std::string path = (fs::path(out_dir) / "failure.json").string();
  std::ofstream(path) << j.dump(2) << "\n";
  return path;
}

}  // namespace

TrainResult train(const TrainConfig& config, const LabeledImages& data, const std::string& out_dir,
                  const TrainHooks& hooks) {
  config.validate();
  const long n = static_cast<long>(data.size());
  if (n < config.batch_size)
    throw ValidationError("training split has " + std::to_string(n) + " images, fewer than batch_size " +
                          std::to_string(config.batch_size));
  const long steps_per_epoch = n / config.batch_size;  // the last partial batch is dropped
  const long total_steps = steps_per_epoch * config.epochs;
  const long warmup_steps = steps_per_epoch * config.warmup_epochs;
  const RampSchedule ramp{config.alpha, config.beta};

  TrainResult result{SiameseModel(config.mode, config.encoder, config.head, derive_seed(config.seed, 0x1417)), {}, {}};
  SiameseModel& model = result.model;
  Sgd optimizer(model.online_parameters(), SgdConfig{config.momentum, config.weight_decay});

  std::ofstream metrics;
  fs::path ckpt_dir;
  if (!out_dir.empty()) {
    ckpt_dir = fs::path(out_dir) / "checkpoints";
    fs::create_directories(ckpt_dir);
    metrics.open(fs::path(out_dir) / "metrics.csv", std::ios::trunc);
    if (!metrics) throw IngestionError(out_dir, "cannot create metrics.csv");
    for (std::size_t i = 0; i < metrics_columns().size(); ++i) metrics << (i ? "," : "") << metrics_columns()[i];
    metrics << "\n";
  }
  const std::string config_json = config.to_json();
  auto checkpoint = [&](const std::string& name, int epoch, long step) {
    if (out_dir.empty()) return;
    const std::string path = (ckpt_dir / name).string();
    save_checkpoint(path, model, CheckpointMeta{config.mode, config.encoder, config.head, epoch, step, config_json},
                    &optimizer);
    result.checkpoints.push_back(path);
  };

  const int res = config.augment.resolution;
  const auto start = std::chrono::steady_clock::now();
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double eta = ramp_up_eta(epoch, ramp);
    std::vector<long> order(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(derive_seed(config.seed, 0x5F1E, static_cast<std::uint64_t>(epoch)));
    for (long i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.index(i + 1)]);

    for (long b = 0; b < steps_per_epoch; ++b, ++step) {
      const int bs = config.batch_size;
      Tensor v1({bs, 3, res, res}), v2({bs, 3, res, res});
#pragma omp parallel for schedule(static)
      for (int k = 0; k < bs; ++k) {
        const long idx = order[b * bs + k];
        const ViewPair pair = sample_view_pair(data.images[idx], config.augment, view_seed(config.seed, epoch, idx));
        std::copy(pair.first.values().begin(), pair.first.values().end(), v1.slice(k).begin());
        std::copy(pair.second.values().begin(), pair.second.values().end(), v2.slice(k).begin());
      }

      MetricsRow row;
      row.epoch = epoch;
      row.step = step;
      row.eta = eta;
      row.lr = lr_at(step, total_steps, warmup_steps, config.base_lr);

      StepOptions opts;
      opts.eta = eta;
      opts.lambda = config.lambda;
      opts.strategy = config.strategy;
      opts.symmetric_suppression = config.symmetric_suppression;
      opts.suppressed_through_predictor = config.suppressed_through_predictor;
      opts.mask_seed = derive_seed(config.seed, 0x3A5C, static_cast<std::uint64_t>(step));
      opts.compute_gradients = true;
      opts.suppressed_diagnostics = config.suppressed_diagnostics;

      const auto t0 = std::chrono::steady_clock::now();
      model.zero_grad();
      const StepOutputs out = forward_views(model, v1, v2, opts);
      row.loss = out.report;
      if (hooks.inspect_loss) hooks.inspect_loss(row);
      if (!finite_report(row.loss, config.strategy != Strategy::none || config.suppressed_diagnostics)) {
        const std::string diag = write_failure(out_dir, row);
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step) +
                                " (eta=" + std::to_string(eta) + ", lr=" + std::to_string(row.lr) +
                                ", d_orig=" + std::to_string(row.loss.d_orig) +
                                ", d_supp=" + std::to_string(row.loss.d_supp) + ")",
                            diag);
      }
      optimizer.step(row.lr);
      model.update_target(config.tau);
      const auto t1 = std::chrono::steady_clock::now();
      row.step_seconds = std::chrono::duration<double>(t1 - t0).count();
      row.wall_clock = std::chrono::duration<double>(t1 - start).count();

      result.metrics.push_back(row);
      if (metrics.is_open()) metrics << metrics_csv_row(row) << "\n" << std::flush;
      if (hooks.on_step) hooks.on_step(row, model);
    }
    if ((epoch + 1) % config.checkpoint_every == 0 && epoch + 1 < config.epochs) {
      std::ostringstream name;
      name << "epoch_" << std::setw(4) << std::setfill('0') << epoch + 1 << ".ckpt";
      checkpoint(name.str(), epoch + 1, step);
    }
  }
  checkpoint("final.ckpt", config.epochs, step);
  return result;
}

}  // namespace feasc
