#include "feasc/frameworks.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace feasc {

std::string to_string(Framework f) { return f == Framework::byol ? "byol" : "simsiam"; }

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::none: return "none";
    case Strategy::feasc: return "feasc";
    case Strategy::random: return "random";
    case Strategy::low_response: return "low_response";
    case Strategy::image_suppress: return "image_suppress";
  }
  return "unknown";
}

Framework parse_framework(const std::string& s) {
  if (s == "byol") return Framework::byol;
  if (s == "simsiam") return Framework::simsiam;
  throw ValidationError("unknown framework '" + s + "' (expected byol or simsiam)");
}

Strategy parse_strategy(const std::string& s) {
  if (s == "none") return Strategy::none;
  if (s == "feasc") return Strategy::feasc;
  if (s == "random") return Strategy::random;
  if (s == "low_response") return Strategy::low_response;
  if (s == "image_suppress") return Strategy::image_suppress;
  throw ValidationError("unknown suppression strategy '" + s + "'");
}

void EncoderSpec::validate() const {
  if (architecture != "tiny-conv") throw ValidationError("unsupported encoder architecture '" + architecture + "'");
  if (in_channels < 1) throw ValidationError("encoder in_channels must be positive");
  if (widths.empty() || widths.size() != strides.size())
    throw ValidationError("encoder widths and strides must be non-empty and of equal length");
  for (std::size_t i = 0; i < widths.size(); ++i)
    if (widths[i] < 1 || strides[i] < 1) throw ValidationError("encoder widths and strides must be positive");
}

int EncoderSpec::out_size(int resolution) const {
  int side = resolution;
  for (int s : strides) side = (side + 2 - 3) / s + 1;
  return side;
}

void HeadSpec::validate() const {
  if (projector_hidden < 1 || embedding_dim < 1 || predictor_hidden < 1)
    throw ValidationError("head dimensions must be positive");
}

Sequential build_encoder(const EncoderSpec& spec, Rng& rng) {
  spec.validate();
  Sequential net;
  int channels = spec.in_channels;
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    net.add<Conv2d>(Conv2dGeometry{channels, spec.widths[i], 3, spec.strides[i], 1}, rng);
    net.add<BatchNorm>(spec.widths[i]);
    net.add<ReLU>();
    channels = spec.widths[i];
  }
  return net;
}

Sequential build_projector(int in_channels, const HeadSpec& spec, Framework framework, Rng& rng) {
  spec.validate();
  Sequential net;
  net.add<GlobalAvgPool>();
  net.add<Linear>(in_channels, spec.projector_hidden, rng, false);
  net.add<BatchNorm>(spec.projector_hidden);
  net.add<ReLU>();
  net.add<Linear>(spec.projector_hidden, spec.embedding_dim, rng, framework == Framework::byol);
  if (framework == Framework::simsiam) net.add<BatchNorm>(spec.embedding_dim, false);
  return net;
}

Sequential build_predictor(const HeadSpec& spec, Rng& rng) {
  spec.validate();
  Sequential net;
  net.add<Linear>(spec.embedding_dim, spec.predictor_hidden, rng, false);
  net.add<BatchNorm>(spec.predictor_hidden);
  net.add<ReLU>();
  net.add<Linear>(spec.predictor_hidden, spec.embedding_dim, rng);
  return net;
}

SiameseModel::SiameseModel(Framework framework, EncoderSpec encoder_spec, HeadSpec head_spec, std::uint64_t seed)
    : framework_(framework), encoder_spec_(std::move(encoder_spec)), head_spec_(head_spec) {
  Rng rng(seed);
  encoder = build_encoder(encoder_spec_, rng);
  projector = build_projector(encoder_spec_.out_channels(), head_spec_, framework_, rng);
  predictor = build_predictor(head_spec_, rng);
  if (framework_ == Framework::byol) {
    target_encoder = encoder;
    target_projector = projector;
  }
}

std::vector<Parameter*> SiameseModel::online_parameters() {
  std::vector<Parameter*> out;
  for (Sequential* net : {&encoder, &projector, &predictor})
    for (Parameter* p : net->parameters()) out.push_back(p);
  return out;
}

void SiameseModel::zero_grad() {
  encoder.zero_grad();
  projector.zero_grad();
  predictor.zero_grad();
  if (has_separate_target()) {
    target_encoder.zero_grad();
    target_projector.zero_grad();
  }
}

void SiameseModel::update_target(double tau) {
  if (!has_separate_target()) return;
  ema_update(target_encoder, encoder, tau);
  ema_update(target_projector, projector, tau);
}

namespace {

void check_embedding_pair(const Tensor& p, const Tensor& z) {
  if (p.rank() != 2 || !p.same_shape(z))
    throw ValidationError("embedding batches must be (B, D) with matching shapes: " + p.shape_string() + " vs " +
                          z.shape_string());
  if (p.dim(0) < 1 || p.dim(1) < 1) throw ValidationError("embedding batch must be non-empty");
}

std::vector<Scalar> row_norms(const Tensor& x, const char* what) {
  std::vector<Scalar> norms(x.dim(0));
  for (int b = 0; b < x.dim(0); ++b) {
    Scalar s = 0;
    for (int d = 0; d < x.dim(1); ++d) s += x.at(b, d) * x.at(b, d);
    norms[b] = std::sqrt(s);
    if (!(norms[b] > 0) || !std::isfinite(norms[b]))
      throw ValidationError(std::string("degenerate embedding: zero or non-finite norm in ") + what + " row " +
                            std::to_string(b));
  }
  return norms;
}

// Mean negative cosine and its gradient, scaled by `scale`.
double negative_cosine(const Tensor& p, const Tensor& z, Tensor* grad_p, double scale) {
  check_embedding_pair(p, z);
  const int rows = p.dim(0), dims = p.dim(1);
  const auto pn = row_norms(p, "prediction");
  const auto zn = row_norms(z, "target");
  if (grad_p) *grad_p = Tensor(p.shape());
  double total = 0;
  for (int b = 0; b < rows; ++b) {
    Scalar cos = 0;
    for (int d = 0; d < dims; ++d) cos += p.at(b, d) * z.at(b, d);
    cos /= pn[b] * zn[b];
    total += cos;
    if (grad_p) {
      const Scalar coef = -scale / rows / pn[b];
      for (int d = 0; d < dims; ++d)
        grad_p->at(b, d) = coef * (z.at(b, d) / zn[b] - cos * p.at(b, d) / pn[b]);
    }
  }
  return -total / rows;
}

}  // namespace

double simsiam_distance(const Tensor& p, const Tensor& z, Tensor* grad_p) {
  return negative_cosine(p, z, grad_p, 1.0);
}

double byol_distance(const Tensor& p, const Tensor& z, Tensor* grad_p) {
  return 2.0 + 2.0 * negative_cosine(p, z, grad_p, 2.0);
}

double contrast_distance(Framework framework, const Tensor& p, const Tensor& z, Tensor* grad_p) {
  return framework == Framework::byol ? byol_distance(p, z, grad_p) : simsiam_distance(p, z, grad_p);
}

double feasc_total_loss(double d_orig, double d_supp, double lambda) {
  if (!std::isfinite(d_orig) || !std::isfinite(d_supp) || !std::isfinite(lambda))
    throw ValidationError("loss terms must be finite");
  if (lambda < 0) throw ValidationError("lambda must be non-negative");
  return d_orig + lambda * d_supp;
}

double mi_bound_constant() { return 0.5 * std::log(2.0 * std::numbers::pi) + 0.5; }

Tensor l2_normalize_rows(const Tensor& x) {
  if (x.rank() != 2) throw ValidationError("expected a (B, D) batch");
  const auto norms = row_norms(x, "embedding");
  Tensor out(x.shape());
  for (int b = 0; b < x.dim(0); ++b)
    for (int d = 0; d < x.dim(1); ++d) out.at(b, d) = x.at(b, d) / norms[b];
  return out;
}

MiTerms mi_lower_bound_terms(const Tensor& a, const Tensor& b) {
  check_embedding_pair(a, b);
  const Tensor an = l2_normalize_rows(a);
  const Tensor bn = l2_normalize_rows(b);
  double sum = 0;
  for (std::size_t i = 0; i < an.size(); ++i) sum += (an[i] - bn[i]) * (an[i] - bn[i]);
  MiTerms out;
  out.mse = sum / static_cast<double>(an.size());
  if (out.mse > 0) out.bound_term = -0.5 * std::log(out.mse) - mi_bound_constant();
  return out;
}

Tensor mask_images(const Tensor& images, const std::vector<SuppressionMask>& masks) {
  if (images.rank() != 4 || static_cast<int>(masks.size()) != images.dim(0))
    throw ValidationError("one mask per image required");
  Tensor out = images;
  const int channels = images.dim(1), height = images.dim(2), width = images.dim(3);
  for (int n = 0; n < images.dim(0); ++n) {
    const auto& m = masks[n];
    for (int y = 0; y < height; ++y) {
      const int i = y * m.height / height;
      for (int x = 0; x < width; ++x) {
        if (!m.at(i, x * m.width / width)) continue;
        for (int c = 0; c < channels; ++c) out.at(n, c, y, x) = 0;
      }
    }
  }
  return out;
}

namespace {

struct HeadPass {
  Trace projector, predictor;
  Tensor projection;
  Tensor output;
};

HeadPass run_head(SiameseModel& model, const Tensor& features, Phase phase, bool through_predictor, bool record) {
  HeadPass h;
  h.projection = model.projector.forward(features, record ? &h.projector : nullptr, phase);
  h.output = through_predictor ? model.predictor.forward(h.projection, record ? &h.predictor : nullptr, phase)
                               : h.projection;
  return h;
}

Tensor head_backward(SiameseModel& model, const HeadPass& h, const Tensor& grad_out, bool through_predictor) {
  Tensor g = through_predictor ? model.predictor.backward(grad_out, h.predictor) : grad_out;
  return model.projector.backward(g, h.projector);
}

MaskSource mask_source(Strategy s) {
  switch (s) {
    case Strategy::random: return MaskSource::random;
    case Strategy::low_response: return MaskSource::low_response;
    default: return MaskSource::high_response;
  }
}

}  // namespace

StepOutputs forward_views(SiameseModel& model, const Tensor& view, const Tensor& view_prime,
                          const StepOptions& options) {
  if (!view.same_shape(view_prime)) throw ValidationError("view pair shapes differ");
  if (!(options.eta >= 0 && options.eta <= 1)) throw ValidationError("eta must lie in [0, 1]");
  if (options.lambda < 0) throw ValidationError("lambda must be non-negative");
  const bool grads = options.compute_gradients;
  const Framework fw = model.framework();
  const bool suppress_active = options.strategy != Strategy::none;

  // Online branch on both views.
  Trace enc1, enc2;
  const Tensor f1 = model.encoder.forward(view, grads ? &enc1 : nullptr, Phase::train);
  const Tensor f2 = model.encoder.forward(view_prime, grads ? &enc2 : nullptr, Phase::train);
  HeadPass h1 = run_head(model, f1, Phase::train, true, grads);
  HeadPass h2 = run_head(model, f2, Phase::train, true, grads);

  // Top branch: never differentiated.
  Tensor t1, t2;
  if (model.has_separate_target()) {
    t1 = model.target_projector.forward(model.target_encoder.forward(view, nullptr, Phase::train_frozen), nullptr,
                                        Phase::train_frozen);
    t2 = model.target_projector.forward(model.target_encoder.forward(view_prime, nullptr, Phase::train_frozen),
                                        nullptr, Phase::train_frozen);
  } else {
    t1 = h1.projection;
    t2 = h2.projection;
  }

  Tensor g1, g2;
  const double d12 = contrast_distance(fw, h1.output, t2, grads ? &g1 : nullptr);
  const double d21 = contrast_distance(fw, h2.output, t1, grads ? &g2 : nullptr);
  const double d_orig = 0.5 * (d12 + d21);

  // Suppressed path on the online side.
  StepOutputs out;
  const bool record_supp = grads && suppress_active && options.lambda > 0;
  const Strategy mask_strategy = suppress_active ? options.strategy : Strategy::feasc;
  auto suppressed_pass = [&](const Tensor& features, const Tensor& image, Trace* image_trace,
                             std::uint64_t seed, std::vector<SuppressionMask>& masks) {
    if (mask_strategy == Strategy::image_suppress) {
      masks = build_batch_masks(features, options.eta, MaskSource::high_response);
      const Tensor masked = mask_images(image, masks);
      const Tensor fm = model.encoder.forward(masked, image_trace, Phase::train_frozen);
      return run_head(model, fm, Phase::train_frozen, options.suppressed_through_predictor, record_supp);
    }
    masks = build_batch_masks(features, options.eta, mask_source(mask_strategy), seed);
    return run_head(model, suppress_batch(features, masks), Phase::train_frozen,
                    options.suppressed_through_predictor, record_supp);
  };

  Trace img2, img1;
  std::vector<SuppressionMask> masks1;
  const bool run_supp = suppress_active || options.suppressed_diagnostics;
  std::optional<HeadPass> hs2, hs1;
  Tensor gs2, gs1;
  double d_supp = std::numeric_limits<double>::quiet_NaN();
  if (run_supp) {
    hs2 = suppressed_pass(f2, view_prime, record_supp ? &img2 : nullptr, options.mask_seed, out.masks);
    d_supp = contrast_distance(fw, hs2->output, t1, record_supp ? &gs2 : nullptr);
    if (options.symmetric_suppression) {
      hs1 = suppressed_pass(f1, view, record_supp ? &img1 : nullptr, derive_seed(options.mask_seed, 1), masks1);
      const double d_supp1 = contrast_distance(fw, hs1->output, t2, record_supp ? &gs1 : nullptr);
      d_supp = 0.5 * (d_supp + d_supp1);
    }
  }

  const double lambda = suppress_active ? options.lambda : 0.0;
  out.report.d_orig = d_orig;
  out.report.d_supp = d_supp;
  out.report.lambda = lambda;
  out.report.total = suppress_active ? feasc_total_loss(d_orig, d_supp, lambda) : d_orig;
  const MiTerms mi_orig = mi_lower_bound_terms(t1, h2.output);
  out.report.mse_orig = mi_orig.mse;
  out.report.mse_supp = hs2 ? mi_lower_bound_terms(t1, hs2->output).mse : std::numeric_limits<double>::quiet_NaN();

  if (grads) {
    for (auto& v : g1.values()) v *= 0.5;
    for (auto& v : g2.values()) v *= 0.5;
    Tensor gf1 = head_backward(model, h1, g1, true);
    Tensor gf2 = head_backward(model, h2, g2, true);
    if (record_supp) {
      const double w = options.symmetric_suppression ? 0.5 * lambda : lambda;
      auto backprop_suppressed = [&](const HeadPass& hs, Tensor& grad, const std::vector<SuppressionMask>& masks,
                                     const Trace& image_trace, Tensor& gf) {
        for (auto& v : grad.values()) v *= w;
        const Tensor gfs = head_backward(model, hs, grad, options.suppressed_through_predictor);
        if (mask_strategy == Strategy::image_suppress)
          model.encoder.backward(gfs, image_trace, false);
        else
          gf += suppress_batch(gfs, masks);
      };
      backprop_suppressed(*hs2, gs2, out.masks, img2, gf2);
      if (hs1) backprop_suppressed(*hs1, gs1, masks1, img1, gf1);
    }
    model.encoder.backward(gf1, enc1, false);
    model.encoder.backward(gf2, enc2, false);
  }

  out.z = std::move(t1);
  out.z_prime = std::move(h2.output);
  if (hs2) out.z_hat = std::move(hs2->output);
  out.features_prime = f2;
  return out;
}

}  // namespace feasc
