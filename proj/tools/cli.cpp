#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "feasc/checkpoint.hpp"
#include "feasc/evaluation.hpp"
#include "feasc/image.hpp"
#include "feasc/suppression.hpp"
#include "feasc/trainer.hpp"

namespace fs = std::filesystem;

namespace feasc::cli {

std::string git_blob_sha1(const std::string& content) {
  std::string data = "blob " + std::to_string(content.size());
  data.push_back('\0');
  data += content;
  return sha1_hex(data);
}

std::string default_output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? env : "runs";
}

Json read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Json j;
  try {
    j = Json::parse(buf.str());
  } catch (const Json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file '" + path + "' must hold a JSON object");
  return j;
}

std::string RunManifest::to_json() const {
  Json j;
  j["command"] = command;
  j["config"] = config;
  j["config_sha1"] = config_sha1;
  j["output_dir"] = output_dir;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  if (!diagnostics.empty()) j["diagnostics"] = diagnostics;
  j["results"] = results;
  return j.dump(2) + "\n";
}

namespace {

std::string utc_now(const char* format = "%Y-%m-%dT%H:%M:%SZ") {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, format, &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IngestionError(path.string(), "cannot write file");
}

class Run {
 public:
  explicit Run(std::string command) { manifest_.command = std::move(command); }

  bool started() const { return started_; }
  const fs::path& dir() const { return dir_; }
  Json& results() { return manifest_.results; }

  void start(const Json& config, const std::string& out_dir) {
    const std::string text = config.dump(2) + "\n";
    manifest_.config = config;
    manifest_.config_sha1 = git_blob_sha1(text);
    if (!out_dir.empty()) {
      dir_ = out_dir;
    } else {
      const fs::path root = default_output_root();
      const std::string stem = manifest_.command + "-" + utc_now("%Y%m%dT%H%M%SZ") + "-" + manifest_.config_sha1.substr(0, 8);
      dir_ = root / stem;
      for (int k = 2; fs::exists(dir_); ++k) dir_ = root / (stem + "-" + std::to_string(k));
    }
    started_ = true;
    fs::create_directories(dir_);
    manifest_.output_dir = dir_.string();
    manifest_.started_at = utc_now();
    manifest_.status = "running";
    write_text(dir_ / "config.json", text);
    save();
  }

  void finish_ok() {
    manifest_.status = "ok";
    manifest_.finished_at = utc_now();
    save();
  }

  /// Records the failure; returns the diagnostics path.
  std::string finish_failed(const std::string& error, std::string diagnostics) {
    if (diagnostics.empty()) {
      diagnostics = (dir_ / "failure.json").string();
      Json j;
      j["command"] = manifest_.command;
      j["error"] = error;
      j["time"] = utc_now();
      write_text(diagnostics, j.dump(2) + "\n");
    }
    manifest_.status = "failed";
    manifest_.error = error;
    manifest_.diagnostics = diagnostics;
    manifest_.finished_at = utc_now();
    save();
    return diagnostics;
  }

 private:
  void save() const { write_text(dir_ / "run.json", manifest_.to_json()); }

  RunManifest manifest_;
  fs::path dir_;
  bool started_ = false;
};

// Flag overrides applied on top of a config file's JSON object.
class Overrides {
 public:
  template <class T>
  void add(CLI::App* app, const std::string& flag, std::vector<std::string> key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    items_.push_back({opt, std::move(key), [value] { return Json(*value); }});
  }

  void apply(Json& j) const {
    for (const auto& item : items_) {
      if (item.option->count() == 0) continue;
      Json* node = &j;
      for (std::size_t i = 0; i + 1 < item.key.size(); ++i) node = &(*node)[item.key[i]];
      (*node)[item.key.back()] = item.value();
    }
  }

  bool given(const std::string& key) const {
    for (const auto& item : items_)
      if (item.key.back() == key && item.option->count() > 0) return true;
    return false;
  }

 private:
  struct Item {
    CLI::Option* option;
    std::vector<std::string> key;
    std::function<Json()> value;
  };
  std::vector<Item> items_;
};

Json load_or_empty(const std::string& path) { return path.empty() ? Json::object() : read_config_file(path); }

void add_train_overrides(CLI::App* app, Overrides& o) {
  o.add<std::string>(app, "--mode", {"mode"}, "simsiam or byol");
  o.add<std::string>(app, "--strategy", {"strategy"}, "none, feasc, random, low_response or image_suppress");
  o.add<std::string>(app, "--dataset", {"dataset"}, "Manifest file or class-per-directory root");
  o.add<int>(app, "--epochs", {"epochs"}, "Pre-training epochs");
  o.add<int>(app, "--batch-size", {"batch_size"}, "Images per step");
  o.add<double>(app, "--lr", {"base_lr"}, "Base learning rate");
  o.add<int>(app, "--warmup", {"warmup_epochs"}, "Linear warm-up epochs");
  o.add<double>(app, "--alpha", {"alpha"}, "Final suppression ratio");
  o.add<int>(app, "--beta", {"beta"}, "Ramp-up epochs");
  o.add<double>(app, "--lambda", {"lambda"}, "Weight of the suppressed term");
  o.add<double>(app, "--tau", {"tau"}, "Target EMA decay (byol)");
  o.add<std::uint64_t>(app, "--seed", {"seed"}, "Global seed");
  o.add<int>(app, "--resolution", {"augment", "resolution"}, "View resolution");
  o.add<int>(app, "--checkpoint-every", {"checkpoint_every"}, "Checkpoint cadence in epochs");
}

void add_eval_overrides(CLI::App* app, Overrides& o, bool with_data) {
  if (with_data) {
    o.add<std::string>(app, "--checkpoint", {"checkpoint"}, "Checkpoint (omit for a random backbone)");
    o.add<std::string>(app, "--dataset", {"dataset"}, "Manifest file or class-per-directory root");
    o.add<double>(app, "--fraction", {"fraction"}, "Fraction of training images per class");
    o.add<int>(app, "--epochs", {"epochs"}, "Classifier epochs");
    o.add<double>(app, "--lr", {"lr"}, "Classifier learning rate");
    o.add<std::uint64_t>(app, "--seed", {"seed"}, "Seed");
    o.add<int>(app, "--batch-size", {"batch_size"}, "Batch size");
    o.add<int>(app, "--resolution", {"resolution"}, "Input resolution");
  } else {
    o.add<double>(app, "--fraction", {"fraction"}, "Probe training fraction");
    o.add<int>(app, "--probe-epochs", {"epochs"}, "Probe epochs");
    o.add<double>(app, "--probe-lr", {"lr"}, "Probe learning rate");
  }
}

TrainConfig resolve_train(const std::string& path, const Overrides& o) {
  Json j = load_or_empty(path);
  o.apply(j);
  TrainConfig cfg = TrainConfig::from_json(j.dump());
  if (cfg.dataset.empty()) throw ConfigError("no dataset: set \"dataset\" in the config or pass --dataset");
  return cfg;
}

// Probe settings for ablations: resolution and seed follow the training config.
EvalConfig resolve_probe(const std::string& path, const Overrides& o, const TrainConfig& train_cfg) {
  Json j = load_or_empty(path);
  o.apply(j);
  if (!j.contains("resolution")) j["resolution"] = train_cfg.augment.resolution;
  j["dataset"] = train_cfg.dataset;
  return EvalConfig::from_json(j.dump());
}

void progress_hook(TrainHooks& hooks, std::ostream& out) {
  auto last = std::make_shared<int>(-1);
  hooks.on_step = [&out, last](const MetricsRow& row, const SiameseModel&) {
    if (row.epoch == *last) return;
    *last = row.epoch;
    out << "epoch " << row.epoch << " eta " << row.eta << " lr " << row.lr << " loss " << row.loss.total << "\n"
        << std::flush;
  };
}

void write_training_plots(const fs::path& dir, const std::vector<MetricsRow>& metrics) {
  PlotSeries orig{"mse_orig", {}, {}}, supp{"mse_supp", {}, {}};
  PlotSeries d_orig{"d_orig", {}, {}}, d_supp{"d_supp", {}, {}}, total{"total", {}, {}};
  for (const auto& m : metrics) {
    const double s = static_cast<double>(m.step);
    orig.x.push_back(s);
    orig.y.push_back(m.loss.mse_orig);
    supp.x.push_back(s);
    supp.y.push_back(m.loss.mse_supp);
    d_orig.x.push_back(s);
    d_orig.y.push_back(m.loss.d_orig);
    d_supp.x.push_back(s);
    d_supp.y.push_back(m.loss.d_supp);
    total.x.push_back(s);
    total.y.push_back(m.loss.total);
  }
  write_line_plot_svg((dir / "mse.svg").string(), "embedding MSE", "step", "mse", {orig, supp});
  write_line_plot_svg((dir / "loss.svg").string(), "training loss", "step", "loss", {d_orig, d_supp, total});
}

struct ProbeLabel {
  std::string method = "random", strategy = "none";
  double lambda = 0;
};

ProbeLabel describe_checkpoint(const std::string& path) {
  ProbeLabel p;
  if (path.empty()) return p;
  const CheckpointMeta meta = read_checkpoint_meta(path);
  p.method = to_string(meta.framework);
  try {
    const TrainConfig t = TrainConfig::from_json(meta.config_json);
    p.strategy = to_string(t.strategy);
    p.lambda = t.strategy == Strategy::none ? 0.0 : t.lambda;
  } catch (const ValidationError&) {
    p.strategy = "unknown";
  }
  return p;
}

void append_result_row(const fs::path& path, const ProbeLabel& p, const EvalConfig& cfg, double top1) {
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (fresh) out << "method,strategy,fraction,lambda,seed,top1\n";
  out << p.method << "," << p.strategy << "," << cfg.fraction << "," << p.lambda << "," << cfg.seed << "," << top1
      << "\n";
}

Json parse_json_text(const std::string& text) { return Json::parse(text); }

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature-suppressed siamese pre-training and evaluation", "feasc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  std::string config_path, out_dir, eval_config_path;

  // pretrain
  CLI::App* pretrain = app.add_subcommand("pretrain", "Self-supervised pre-training");
  Overrides pretrain_o;
  pretrain->add_option("--config", config_path, "Training config (JSON)");
  pretrain->add_option("--out", out_dir, "Run directory");
  add_train_overrides(pretrain, pretrain_o);

  // linear-eval and finetune
  CLI::App* linear = app.add_subcommand("linear-eval", "Linear probe on frozen features");
  CLI::App* tune = app.add_subcommand("finetune", "Fine-tune every parameter");
  Overrides linear_o, tune_o;
  for (auto [sub, o] : {std::pair{linear, &linear_o}, std::pair{tune, &tune_o}}) {
    sub->add_option("--config", config_path, "Evaluation config (JSON)");
    sub->add_option("--out", out_dir, "Run directory");
    add_eval_overrides(sub, *o, true);
  }

  // ablate
  CLI::App* ablate = app.add_subcommand("ablate", "Pre-train and probe under several suppression strategies");
  Overrides ablate_o, ablate_probe;
  std::vector<std::string> strategies{"none", "feasc", "random", "low_response", "image_suppress"};
  std::vector<std::uint64_t> seeds;
  ablate->add_option("--config", config_path, "Training config (JSON)");
  ablate->add_option("--eval-config", eval_config_path, "Probe config (JSON)");
  ablate->add_option("--out", out_dir, "Run directory");
  ablate->add_option("--strategies", strategies, "Strategies to compare")->delimiter(',');
  ablate->add_option("--seeds", seeds, "Seeds (default: the config seed)")->delimiter(',');
  add_train_overrides(ablate, ablate_o);
  add_eval_overrides(ablate, ablate_probe, false);

  // sweep-lambda
  CLI::App* sweep = app.add_subcommand("sweep-lambda", "Pre-train and probe for each lambda");
  Overrides sweep_o, sweep_probe;
  std::vector<double> grid;
  sweep->add_option("--config", config_path, "Training config (JSON)");
  sweep->add_option("--eval-config", eval_config_path, "Probe config (JSON)");
  sweep->add_option("--out", out_dir, "Run directory");
  sweep->add_option("--grid", grid, "Lambda values, comma separated")->delimiter(',')->required();
  add_train_overrides(sweep, sweep_o);
  add_eval_overrides(sweep, sweep_probe, false);

  // inspect
  CLI::App* inspect = app.add_subcommand("inspect", "Response-map heatmaps for two views of one image");
  std::string checkpoint, image_path;
  std::uint64_t inspect_seed = 0;
  double eta = -1;
  inspect->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  inspect->add_option("--image", image_path, "Image file")->required();
  inspect->add_option("--seed", inspect_seed, "View sampling seed");
  CLI::Option* eta_opt = inspect->add_option("--eta", eta, "Mask ratio (default: schedule value at the checkpoint)");
  inspect->add_option("--out", out_dir, "Run directory");

  // gen-data
  CLI::App* gen = app.add_subcommand("gen-data", "Write the synthetic dataset");
  Overrides gen_o;
  gen->add_option("--config", config_path, "Generator config (JSON)");
  gen->add_option("--out", out_dir, "Dataset directory");
  gen_o.add<int>(gen, "--classes", {"n_classes"}, "Number of classes");
  gen_o.add<int>(gen, "--per-class", {"n_per_class"}, "Images per class");
  gen_o.add<int>(gen, "--resolution", {"resolution"}, "Image side");
  gen_o.add<std::uint64_t>(gen, "--seed", {"seed"}, "Seed");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Run run(chosen->get_name());
  try {
    if (chosen == pretrain) {
      const TrainConfig cfg = resolve_train(config_path, pretrain_o);
      run.start(parse_json_text(cfg.to_json()), out_dir);
      out << "run directory: " << run.dir().string() << "\n";
      TrainHooks hooks;
      progress_hook(hooks, out);
      const TrainResult result = train(cfg, load_training_data(cfg), run.dir().string(), hooks);
      write_training_plots(run.dir(), result.metrics);
      run.results()["checkpoint"] = result.checkpoints.back();
      run.results()["steps"] = result.metrics.size();
      if (!result.metrics.empty()) run.results()["final_loss"] = result.metrics.back().loss.total;
      out << "checkpoint: " << result.checkpoints.back() << "\n";
    } else if (chosen == linear || chosen == tune) {
      Json j = load_or_empty(config_path);
      (chosen == linear ? linear_o : tune_o).apply(j);
      j["protocol"] = chosen == linear ? "linear" : "finetune";
      const EvalConfig cfg = EvalConfig::from_json(j.dump());
      if (cfg.dataset.empty()) throw ConfigError("no dataset: set \"dataset\" in the config or pass --dataset");
      run.start(parse_json_text(cfg.to_json()), out_dir);
      const ProbeLabel label = describe_checkpoint(cfg.checkpoint);
      const EvalResult r = evaluate(cfg);
      append_result_row(run.dir() / "results.csv", label, cfg, r.top1);
      run.results()["top1"] = r.top1;
      out << to_string(cfg.protocol) << " top-1 " << r.top1 << "\n";
    } else if (chosen == ablate) {
      const TrainConfig base = resolve_train(config_path, ablate_o);
      const EvalConfig probe = resolve_probe(eval_config_path, ablate_probe, base);
      std::vector<Strategy> parsed;
      for (const auto& s : strategies) parsed.push_back(parse_strategy(s));
      if (parsed.empty()) throw ConfigError("no strategies given");
      if (seeds.empty()) seeds.push_back(base.seed);
      Json snapshot;
      snapshot["train"] = parse_json_text(base.to_json());
      snapshot["eval"] = parse_json_text(probe.to_json());
      snapshot["strategies"] = strategies;
      snapshot["seeds"] = seeds;
      run.start(snapshot, out_dir);
      const ExperimentData data = load_experiment_data(base.dataset);
      std::vector<AblationRow> rows;
      for (std::uint64_t seed : seeds)
        for (Strategy s : parsed) {
          TrainConfig cfg = base;
          cfg.seed = seed;
          EvalConfig p = probe;
          p.seed = seed;
          const std::string sub = to_string(s) + "_seed" + std::to_string(seed);
          out << "running " << sub << "\n" << std::flush;
          rows.push_back(run_ablation(cfg, s, p, data, (run.dir() / sub).string()));
          out << sub << " top-1 " << rows.back().top1 << " median step " << rows.back().median_step_seconds << " s\n";
        }
      write_results_csv((run.dir() / "results.csv").string(), rows);
      std::ofstream timing(run.dir() / "timing.csv");
      timing << "strategy,seed,median_step_seconds\n";
      for (const auto& r : rows) timing << to_string(r.strategy) << "," << r.seed << "," << r.median_step_seconds << "\n";
      run.results()["rows"] = rows.size();
    } else if (chosen == sweep) {
      const TrainConfig base = resolve_train(config_path, sweep_o);
      const EvalConfig probe = resolve_probe(eval_config_path, sweep_probe, base);
      if (grid.empty()) throw ValidationError("lambda grid is empty");
      Json snapshot;
      snapshot["train"] = parse_json_text(base.to_json());
      snapshot["eval"] = parse_json_text(probe.to_json());
      snapshot["grid"] = grid;
      run.start(snapshot, out_dir);
      const SweepResult r = sweep_lambda(base, grid, probe, load_experiment_data(base.dataset), run.dir().string());
      for (const auto& w : r.warnings) err << "warning: " << w << "\n";
      for (const auto& row : r.rows) out << "lambda " << row.lambda << " top-1 " << row.top1 << "\n";
      run.results()["rows"] = r.rows.size();
      run.results()["warnings"] = r.warnings;
    } else if (chosen == inspect) {
      if (eta_opt->count() > 0 && !(eta >= 0 && eta <= 1)) throw ValidationError("eta must be in [0, 1]");
      Json snapshot;
      snapshot["checkpoint"] = checkpoint;
      snapshot["image"] = image_path;
      snapshot["seed"] = inspect_seed;
      if (eta_opt->count() > 0) snapshot["eta"] = eta;
      run.start(snapshot, out_dir);
      CheckpointMeta meta;
      SiameseModel model = load_checkpoint(checkpoint, &meta);
      const TrainConfig tc = TrainConfig::from_json(meta.config_json);
      const double used_eta = eta_opt->count() > 0 ? eta : ramp_up_eta(meta.epoch, RampSchedule{tc.alpha, tc.beta});
      const Tensor image = load_image(image_path);
      const HeatmapViews h = export_heatmap(model.encoder, image, tc.augment, inspect_seed, used_eta, run.dir().string());
      run.results()["eta"] = used_eta;
      run.results()["files"] = h.files;
      for (const auto& f : h.files) out << f << "\n";
    } else if (chosen == gen) {
      Json j = load_or_empty(config_path);
      gen_o.apply(j);
      require_known_keys(j, {"n_classes", "n_per_class", "resolution", "seed"}, "generator config");
      SyntheticSpec spec;
      read_field(j, "n_classes", spec.n_classes, "generator config");
      read_field(j, "n_per_class", spec.n_per_class, "generator config");
      read_field(j, "resolution", spec.resolution, "generator config");
      read_field(j, "seed", spec.seed, "generator config");
      spec.validate();
      Json snapshot;
      snapshot["n_classes"] = spec.n_classes;
      snapshot["n_per_class"] = spec.n_per_class;
      snapshot["resolution"] = spec.resolution;
      snapshot["seed"] = spec.seed;
      run.start(snapshot, out_dir);
      const DatasetManifest m = generate_synthetic(run.dir().string(), spec);
      run.results()["images"] = m.entries.size();
      run.results()["checksum"] = m.checksum;
      out << "wrote " << m.entries.size() << " images to " << run.dir().string() << "\n";
    }
    run.finish_ok();
    return 0;
  } catch (const std::exception& e) {
    const bool config_error =
        dynamic_cast<const ConfigError*>(&e) != nullptr || dynamic_cast<const ValidationError*>(&e) != nullptr;
    if (!run.started()) {
      err << (config_error ? "config error: " : "error: ") << e.what() << "\n";
      return config_error ? 2 : 1;
    }
    const auto* training = dynamic_cast<const TrainingError*>(&e);
    std::string diagnostics;
    try {
      diagnostics = run.finish_failed(e.what(), training ? training->diagnostics_path() : "");
    } catch (const std::exception& inner) {
      err << "could not record failure: " << inner.what() << "\n";
    }
    err << "runtime error: " << e.what() << "\n";
    if (!diagnostics.empty()) err << "diagnostics: " << diagnostics << "\n";
    return 1;
  }
}

int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return dispatch(args, out, err);
}

}  // namespace feasc::cli
