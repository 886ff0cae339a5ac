#include "feasc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "feasc/augment.hpp"
#include "feasc/checkpoint.hpp"
#include "feasc/config_json.hpp"
#include "feasc/image.hpp"
#include "feasc/optim.hpp"

namespace fs = std::filesystem;

namespace feasc {

std::string to_string(Protocol p) { return p == Protocol::linear ? "linear" : "finetune"; }

Protocol parse_protocol(const std::string& s) {
  if (s == "linear") return Protocol::linear;
  if (s == "finetune") return Protocol::finetune;
  throw ValidationError("unknown protocol '" + s + "' (expected linear or finetune)");
}

void EvalConfig::validate() const {
  SubsetSpec{fraction, seed}.validate();
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (!(lr >= 0) || !(weight_decay >= 0)) throw ValidationError("rates must be non-negative");
  if (!(momentum >= 0 && momentum < 1)) throw ValidationError("momentum must be in [0, 1)");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2");
  if (resolution < 8) throw ValidationError("resolution must be >= 8");
}

std::string EvalConfig::to_json() const {
  Json j;
  j["checkpoint"] = checkpoint;
  j["protocol"] = to_string(protocol);
  j["dataset"] = dataset;
  j["fraction"] = fraction;
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["seed"] = seed;
  j["batch_size"] = batch_size;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["resolution"] = resolution;
  return j.dump(2) + "\n";
}

EvalConfig EvalConfig::from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  require_known_keys(j,
                     {"checkpoint", "protocol", "dataset", "fraction", "epochs", "lr", "seed", "batch_size", "momentum",
                      "weight_decay", "resolution"},
                     "eval config");
  EvalConfig c;
  const std::string w = "eval config";
  std::string protocol = to_string(c.protocol);
  read_field(j, "protocol", protocol, w);
  c.protocol = parse_protocol(protocol);
  read_field(j, "checkpoint", c.checkpoint, w);
  read_field(j, "dataset", c.dataset, w);
  read_field(j, "fraction", c.fraction, w);
  read_field(j, "epochs", c.epochs, w);
  read_field(j, "lr", c.lr, w);
  read_field(j, "seed", c.seed, w);
  read_field(j, "batch_size", c.batch_size, w);
  read_field(j, "momentum", c.momentum, w);
  read_field(j, "weight_decay", c.weight_decay, w);
  read_field(j, "resolution", c.resolution, w);
  c.validate();
  return c;
}

namespace {

Tensor pool(const Tensor& f) {
  const int n = f.dim(0), c = f.dim(1), hw = f.dim(2) * f.dim(3);
  Tensor out({n, c});
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < c; ++k) {
      const Scalar* p = f.data() + (static_cast<std::size_t>(i) * c + k) * hw;
      double s = 0;
      for (int q = 0; q < hw; ++q) s += p[q];
      out.at(i, k) = s / hw;
    }
  return out;
}

// Contiguous chunks of near-equal size, none smaller than two samples when n >= 2.
std::vector<std::pair<std::size_t, std::size_t>> chunks(std::size_t n, int batch_size) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n == 0) return out;
  std::size_t count = (n + batch_size - 1) / batch_size;
  while (count > 1 && n / count < 2) --count;
  for (std::size_t k = 0; k < count; ++k) out.emplace_back(k * n / count, (k + 1) * n / count);
  return out;
}

Tensor stack_range(const std::vector<Tensor>& views, const std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi) {
  std::vector<Tensor> batch;
  batch.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) batch.push_back(views[idx.empty() ? i : idx[i]]);
  return stack(batch);
}

Sequential classifier_head(int features, int classes, std::uint64_t seed, bool with_pool) {
  Rng rng(derive_seed(seed, 0xC1A5));
  Sequential head;
  if (with_pool) head.add<GlobalAvgPool>();
  head.add<BatchNorm>(features, false);
  head.add<Linear>(features, classes, rng);
  return head;
}

int feature_dim(Sequential& backbone, const EncoderSpec& spec, int resolution) {
  const Tensor probe({1, spec.in_channels, resolution, resolution});
  const Tensor f = backbone.forward(probe, nullptr, Phase::eval);
  if (f.rank() != 4) throw ValidationError("backbone must produce (N, C, H, W) features");
  if (f.dim(1) != spec.out_channels())
    throw ValidationError("backbone produces " + std::to_string(f.dim(1)) + " channels but the classifier expects " +
                          std::to_string(spec.out_channels()));
  return f.dim(1);
}

std::vector<Tensor> augmented_views(const LabeledImages& data, int resolution, std::uint64_t seed, int epoch) {
  const AugmentPolicy policy = AugmentPolicy::crop_flip(std::max(32, resolution));
  std::vector<Tensor> views(data.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng(view_seed(seed, epoch, i));
    views[i] = sample_view(data.images[i], policy, rng);
    if (resolution != policy.resolution) views[i] = resize(views[i], resolution, resolution);
  }
  return views;
}

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x0DE5, static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  return order;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (labels.empty()) throw ValidationError("empty test split");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void check_splits(const LabeledImages& train, const LabeledImages& test) {
  if (train.size() < 2) throw ValidationError("training split needs at least two images");
  if (test.size() == 0) throw ValidationError("empty test split");
  if (train.n_classes < 2) throw ValidationError("need at least two classes");
}

}  // namespace

Tensor extract_features(Sequential& backbone, const std::vector<Tensor>& views, int batch_size) {
  if (views.empty()) return Tensor();
  std::vector<Tensor> parts;
  int c = 0;
  for (std::size_t lo = 0; lo < views.size(); lo += batch_size) {
    const std::size_t hi = std::min(views.size(), lo + static_cast<std::size_t>(batch_size));
    parts.push_back(pool(backbone.forward(stack_range(views, {}, lo, hi), nullptr, Phase::eval)));
    c = parts.back().dim(1);
  }
  Tensor out({static_cast<int>(views.size()), c});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(), out.data() + offset);
    offset += p.size();
  }
  return out;
}

std::vector<Tensor> center_views(const LabeledImages& data, int resolution) {
  std::vector<Tensor> views(data.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < data.size(); ++i) views[i] = center_view(data.images[i], resolution);
  return views;
}

double cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tensor* grad) {
  const int n = logits.dim(0), k = logits.dim(1);
  if (static_cast<int>(labels.size()) != n) throw ValidationError("label count does not match logits");
  if (grad) *grad = Tensor(logits.shape());
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= k) throw ValidationError("label out of range for classifier");
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0;
    for (int j = 0; j < k; ++j) z += std::exp(logits.at(i, j) - mx);
    loss += std::log(z) + mx - logits.at(i, labels[i]);
    if (grad)
      for (int j = 0; j < k; ++j) grad->at(i, j) = (std::exp(logits.at(i, j) - mx) / z - (j == labels[i])) / n;
  }
  return loss / n;
}

std::vector<int> predict(Sequential& backbone, Sequential& head, const std::vector<Tensor>& views, int batch_size) {
  std::vector<int> out;
  out.reserve(views.size());
  for (std::size_t lo = 0; lo < views.size(); lo += batch_size) {
    const std::size_t hi = std::min(views.size(), lo + static_cast<std::size_t>(batch_size));
    const Tensor logits = head.forward(backbone.forward(stack_range(views, {}, lo, hi), nullptr, Phase::eval), nullptr,
                                       Phase::eval);
    for (int i = 0; i < logits.dim(0); ++i) {
      int best = 0;
      for (int j = 1; j < logits.dim(1); ++j)
        if (logits.at(i, j) > logits.at(i, best)) best = j;
      out.push_back(best);
    }
  }
  return out;
}

EvalResult linear_probe(const Sequential& backbone_in, const EncoderSpec& spec, const LabeledImages& train,
                        const LabeledImages& test, const EvalConfig& cfg) {
  cfg.validate();
  check_splits(train, test);
  Sequential backbone = backbone_in;
  const int c = feature_dim(backbone, spec, cfg.resolution);
  Sequential head = classifier_head(c, train.n_classes, cfg.seed, true);
  Sgd sgd(head.parameters(), SgdConfig{cfg.momentum, cfg.weight_decay});

  const auto batches = chunks(train.size(), cfg.batch_size);
  const long total = static_cast<long>(batches.size()) * cfg.epochs;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto views = augmented_views(train, cfg.resolution, cfg.seed, epoch);
    const auto order = shuffled(train.size(), cfg.seed, epoch);
    for (const auto& [lo, hi] : batches) {
      const Tensor f = backbone.forward(stack_range(views, order, lo, hi), nullptr, Phase::eval);
      std::vector<int> labels;
      for (std::size_t i = lo; i < hi; ++i) labels.push_back(train.labels[order[i]]);
      Trace trace;
      const Tensor logits = head.forward(f, &trace, Phase::train);
      Tensor grad;
      cross_entropy(logits, labels, &grad);
      head.zero_grad();
      head.backward(grad, trace, false);
      sgd.step(lr_at(step++, total, 0, cfg.lr));
    }
  }
  if (!same_state(backbone, backbone_in)) throw std::logic_error("linear probe modified the backbone");

  EvalResult r;
  r.predictions = predict(backbone, head, center_views(test, cfg.resolution), cfg.batch_size);
  r.top1 = accuracy(r.predictions, test.labels);
  return r;
}

EvalResult finetune(const Sequential& backbone_in, const EncoderSpec& spec, const LabeledImages& train,
                    const LabeledImages& test, const EvalConfig& cfg) {
  cfg.validate();
  check_splits(train, test);
  Sequential backbone = backbone_in;
  const int c = feature_dim(backbone, spec, cfg.resolution);
  Sequential head = classifier_head(c, train.n_classes, cfg.seed, true);
  std::vector<Parameter*> params = backbone.parameters();
  for (Parameter* p : head.parameters()) params.push_back(p);
  Sgd sgd(params, SgdConfig{cfg.momentum, cfg.weight_decay});

  const auto batches = chunks(train.size(), cfg.batch_size);
  const long total = static_cast<long>(batches.size()) * cfg.epochs;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto views = augmented_views(train, cfg.resolution, cfg.seed, epoch);
    const auto order = shuffled(train.size(), cfg.seed, epoch);
    for (const auto& [lo, hi] : batches) {
      std::vector<int> labels;
      for (std::size_t i = lo; i < hi; ++i) labels.push_back(train.labels[order[i]]);
      Trace enc_trace, head_trace;
      const Tensor f = backbone.forward(stack_range(views, order, lo, hi), &enc_trace, Phase::train);
      const Tensor logits = head.forward(f, &head_trace, Phase::train);
      Tensor grad;
      cross_entropy(logits, labels, &grad);
      backbone.zero_grad();
      head.zero_grad();
      backbone.backward(head.backward(grad, head_trace), enc_trace, false);
      sgd.step(lr_at(step++, total, 0, cfg.lr));
    }
  }
  if (cfg.epochs > 0 && same_state(backbone, backbone_in))
    throw std::logic_error("fine-tuning left the backbone weights unchanged");

  EvalResult r;
  r.predictions = predict(backbone, head, center_views(test, cfg.resolution), cfg.batch_size);
  r.top1 = accuracy(r.predictions, test.labels);
  return r;
}

EvalResult evaluate(const EvalConfig& cfg) {
  cfg.validate();
  if (cfg.dataset.empty()) throw ValidationError("eval config has no dataset");
  const DatasetManifest m = fs::is_directory(cfg.dataset) ? build_manifest(cfg.dataset) : DatasetManifest::load(cfg.dataset);
  const LabeledImages train = load_split(stratified_subset(m, {cfg.fraction, cfg.seed}), "train");
  const LabeledImages test = load_split(m, "test");
  EncoderSpec spec;
  Sequential backbone;
  if (cfg.checkpoint.empty()) {
    Rng rng(derive_seed(cfg.seed, 0xBAC));
    backbone = build_encoder(spec, rng);
  } else {
    backbone = load_backbone(cfg.checkpoint, &spec);
  }
  return cfg.protocol == Protocol::linear ? linear_probe(backbone, spec, train, test, cfg)
                                          : finetune(backbone, spec, train, test, cfg);
}

std::vector<double> embedding_std(SiameseModel& model, const std::vector<Tensor>& views, int batch_size) {
  std::vector<Tensor> parts;
  for (std::size_t lo = 0; lo < views.size(); lo += batch_size) {
    const std::size_t hi = std::min(views.size(), lo + static_cast<std::size_t>(batch_size));
    const Tensor f = model.encoder.forward(stack_range(views, {}, lo, hi), nullptr, Phase::eval);
    parts.push_back(l2_normalize_rows(model.projector.forward(f, nullptr, Phase::eval)));
  }
  const int d = parts.front().dim(1);
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  std::size_t n = 0;
  for (const auto& p : parts)
    for (int i = 0; i < p.dim(0); ++i, ++n)
      for (int k = 0; k < d; ++k) mean[k] += p.at(i, k);
  for (auto& m : mean) m /= static_cast<double>(n);
  for (const auto& p : parts)
    for (int i = 0; i < p.dim(0); ++i)
      for (int k = 0; k < d; ++k) sq[k] += (p.at(i, k) - mean[k]) * (p.at(i, k) - mean[k]);
  std::vector<double> out(d);
  for (int k = 0; k < d; ++k) out[k] = std::sqrt(sq[k] / static_cast<double>(n));
  return out;
}

ExperimentData load_experiment_data(const std::string& dataset) {
  const DatasetManifest m = fs::is_directory(dataset) ? build_manifest(dataset) : DatasetManifest::load(dataset);
  return {load_split(m, "train"), load_split(m, "test")};
}

AblationRow run_ablation(const TrainConfig& base, Strategy strategy, const EvalConfig& probe, const ExperimentData& data,
                         const std::string& out_dir) {
  TrainConfig cfg = base;
  cfg.strategy = strategy;
  TrainResult trained = train(cfg, data.train, out_dir);
  AblationRow row;
  row.framework = cfg.mode;
  row.strategy = strategy;
  row.lambda = strategy == Strategy::none ? 0.0 : cfg.lambda;
  row.fraction = probe.fraction;
  row.seed = cfg.seed;
  row.top1 = linear_probe(trained.model.encoder, cfg.encoder, data.train, data.test, probe).top1;
  std::vector<double> times;
  for (const auto& m : trained.metrics) times.push_back(m.step_seconds);
  if (!times.empty()) {
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    row.median_step_seconds = times[times.size() / 2];
  }
  row.metrics = std::move(trained.metrics);
  return row;
}

SweepResult sweep_lambda(const TrainConfig& base, std::vector<double> grid, const EvalConfig& probe,
                         const ExperimentData& data, const std::string& out_dir) {
  if (grid.empty()) throw ValidationError("lambda grid is empty");
  SweepResult result;
  std::vector<double> unique;
  for (double l : grid) {
    if (!(l >= 0)) throw ValidationError("lambda values must be non-negative");
    if (std::find(unique.begin(), unique.end(), l) != unique.end()) {
      std::ostringstream msg;
      msg << "duplicate lambda " << l << " ignored";
      result.warnings.push_back(msg.str());
      continue;
    }
    unique.push_back(l);
  }
  for (double l : unique) {
    TrainConfig cfg = base;
    cfg.lambda = l;
    std::string run_dir;
    if (!out_dir.empty()) {
      std::ostringstream name;
      name << "lambda_" << l;
      run_dir = (fs::path(out_dir) / name.str()).string();
    }
    result.rows.push_back(run_ablation(cfg, Strategy::feasc, probe, data, run_dir));
  }
  if (!out_dir.empty()) {
    write_results_csv((fs::path(out_dir) / "sweep.csv").string(), result.rows);
    PlotSeries s{"top-1", {}, {}};
    auto rows = result.rows;
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
    for (const auto& r : rows) {
      s.x.push_back(r.lambda);
      s.y.push_back(r.top1);
    }
    write_line_plot_svg((fs::path(out_dir) / "sweep.svg").string(), "linear probe vs lambda", "lambda", "top-1", {s});
  }
  return result;
}

void write_results_csv(const std::string& path, const std::vector<AblationRow>& rows) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IngestionError(path, "cannot write results");
  if (fresh) out << "method,strategy,fraction,lambda,seed,top1\n";
  for (const auto& r : rows)
    out << to_string(r.framework) << "," << to_string(r.strategy) << "," << r.fraction << "," << r.lambda << ","
        << r.seed << "," << r.top1 << "\n";
}

Tensor normalized_response(const ResponseMap& m) {
  Tensor out({m.height, m.width});
  const auto [lo, hi] = std::minmax_element(m.values.begin(), m.values.end());
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < m.values.size(); ++i) out[i] = range > 0 ? (m.values[i] - *lo) / range : 0.0;
  return out;
}

HeatmapViews export_heatmap(Sequential& backbone, const Tensor& image, const AugmentPolicy& policy, std::uint64_t seed,
                            double eta, const std::string& out_dir) {
  const ViewPair pair = sample_view_pair(image, policy, seed);
  HeatmapViews out;
  out.views[0] = pair.first;
  out.views[1] = pair.second;
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const int r = policy.resolution;
  for (int k = 0; k < 2; ++k) {
    const Tensor f = backbone.forward(stack({out.views[k]}), nullptr, Phase::eval);
    const Tensor m = response_maps(f);
    ResponseMap rm{m.dim(1), m.dim(2), std::vector<Scalar>(m.values().begin(), m.values().end())};
    out.mask[k] = build_mask(rm, eta);
    out.response[k] = std::move(rm);
    if (out_dir.empty()) continue;

    const std::string stem = (fs::path(out_dir) / ("view" + std::to_string(k + 1))).string();
    save_image(stem + ".png", out.views[k]);
    save_image(stem + "_response.png", upsample_nearest(normalized_response(out.response[k]), r, r));

    Tensor mask_grid({out.mask[k].height, out.mask[k].width});
    for (std::size_t i = 0; i < mask_grid.size(); ++i) mask_grid[i] = out.mask[k].values[i];
    const Tensor up = upsample_nearest(mask_grid, r, r);
    Tensor overlay = out.views[k];
    const std::size_t plane = static_cast<std::size_t>(r) * r;
    for (std::size_t i = 0; i < plane; ++i)
      if (up[i] > 0) {
        overlay[i] = 0.5 * overlay[i] + 0.5;
        overlay[plane + i] *= 0.5;
        overlay[2 * plane + i] *= 0.5;
      }
    save_image(stem + "_mask.png", overlay);
    std::ofstream grid(stem + "_response.grid", std::ios::binary);
    write_grid(grid, out.response[k]);
    std::ofstream mgrid(stem + "_mask.grid", std::ios::binary);
    write_grid(mgrid, out.mask[k]);
    for (const char* suffix : {".png", "_response.png", "_mask.png", "_response.grid", "_mask.grid"})
      out.files.push_back(stem + suffix);
  }
  return out;
}

void write_line_plot_svg(const std::string& path, const std::string& title, const std::string& x_label,
                         const std::string& y_label, const std::vector<PlotSeries>& series) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) x1 = x0 + 1;
  if (!(y1 > y0)) y1 = y0 + 1;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::ofstream out(path);
  if (!out) throw IngestionError(path, "cannot write plot");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
      << ")\" text-anchor=\"middle\" font-size=\"13\">" << y_label << "</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = x0 + (x1 - x0) * t / 4, yv = y0 + (y1 - y0) * t / 4;
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << xv
        << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << yv
        << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) out << px(s.x[i]) << "," << py(s.y[i]) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << W - R - 100 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << color
        << "\" font-size=\"12\">" << s.name << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace feasc
