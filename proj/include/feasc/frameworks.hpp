#pragma once

// BYOL and SimSiam siamese scaffolds with the feature-suppressed contrast term.
//
// Branch roles for a view pair (v, v'):
//   top (target)  : z  = g(f(v))          target network in BYOL, detached twin in SimSiam
//   bottom (online): z' = q(g'(f(v')))      unsuppressed path
//                    z^ = q(g'(F'_hat))     suppressed path, same g' and q weights
// The base loss is symmetrised over the two views; the suppressed term
// D(z, z^) is added once per step unless symmetric_suppression is set.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feasc/nn.hpp"
#include "feasc/suppression.hpp"
#include "feasc/tensor.hpp"

namespace feasc {

enum class Framework { byol, simsiam };

enum class Strategy { none, feasc, random, low_response, image_suppress };

std::string to_string(Framework f);
std::string to_string(Strategy s);
Framework parse_framework(const std::string& s);
Strategy parse_strategy(const std::string& s);

struct EncoderSpec {
  std::string architecture = "tiny-conv";
  int in_channels = 3;
  std::vector<int> widths{16, 32, 32};
  std::vector<int> strides{2, 2, 1};

  void validate() const;
  int out_channels() const { return widths.back(); }
  /// Spatial side of the final feature map for a square input.
  int out_size(int resolution) const;
};

struct HeadSpec {
  int projector_hidden = 64;
  int embedding_dim = 64;
  int predictor_hidden = 32;

  void validate() const;
};

Sequential build_encoder(const EncoderSpec& spec, Rng& rng);
/// Pooling + MLP. SimSiam variants end with a batch norm on the embedding.
Sequential build_projector(int in_channels, const HeadSpec& spec, Framework framework, Rng& rng);
Sequential build_predictor(const HeadSpec& spec, Rng& rng);

class SiameseModel {
 public:
  SiameseModel(Framework framework, EncoderSpec encoder_spec, HeadSpec head_spec, std::uint64_t seed);

  Framework framework() const { return framework_; }
  const EncoderSpec& encoder_spec() const { return encoder_spec_; }
  const HeadSpec& head_spec() const { return head_spec_; }
  /// In SimSiam the target branch aliases the online one.
  bool has_separate_target() const { return framework_ == Framework::byol; }

  Sequential encoder, projector, predictor;
  Sequential target_encoder, target_projector;  // populated in BYOL mode only

  std::vector<Parameter*> online_parameters();
  void zero_grad();
  /// target <- tau * target + (1 - tau) * online. No-op for SimSiam.
  void update_target(double tau);

 private:
  Framework framework_;
  EncoderSpec encoder_spec_;
  HeadSpec head_spec_;
};

/// Mean over rows of -<p/|p|, z/|z|>. Writes dD/dp when grad_p is given.
double simsiam_distance(const Tensor& p, const Tensor& z, Tensor* grad_p = nullptr);
/// Mean over rows of |p/|p| - z/|z||^2 = 2 - 2 cos(p, z).
double byol_distance(const Tensor& p, const Tensor& z, Tensor* grad_p = nullptr);
double contrast_distance(Framework framework, const Tensor& p, const Tensor& z, Tensor* grad_p = nullptr);

struct LossReport {
  double d_orig = 0;    // symmetrised base term
  double d_supp = 0;    // suppressed term D(z, z^)
  double lambda = 0;
  double total = 0;
  double mse_orig = 0;  // E[(z - z')^2] on normalised embeddings
  double mse_supp = 0;  // E[(z - z^)^2]
};

/// d_orig + lambda * d_supp.
double feasc_total_loss(double d_orig, double d_supp, double lambda);

/// Constant of the Gaussian conditional bound, (1/2) log(2 pi) + 1/2.
double mi_bound_constant();

struct MiTerms {
  double mse = 0;
  std::optional<double> bound_term;  // -(1/2) log(mse) - C; empty when mse == 0

  bool degenerate() const { return !bound_term.has_value(); }
};

/// Rows are L2-normalised before the mean squared error over batch and dims.
MiTerms mi_lower_bound_terms(const Tensor& a, const Tensor& b);

/// Rows scaled to unit norm (zero rows rejected).
Tensor l2_normalize_rows(const Tensor& x);

struct StepOptions {
  double eta = 0;
  double lambda = 1;
  Strategy strategy = Strategy::feasc;
  bool symmetric_suppression = false;
  bool suppressed_through_predictor = true;
  std::uint64_t mask_seed = 0;  // random strategy only
  bool compute_gradients = false;
  /// none strategy only: still run the suppressed pass so d_supp and mse_supp
  /// are reported. When false both are NaN and z_hat is empty.
  bool suppressed_diagnostics = true;
};

struct StepOutputs {
  Tensor z;        // top branch of v
  Tensor z_prime;  // online output of v'
  Tensor z_hat;    // online output of the suppressed v' features
  Tensor features_prime;
  std::vector<SuppressionMask> masks;
  LossReport report;
};

/// Runs both branches on a view pair. With compute_gradients the online
/// parameter gradients of report.total are accumulated (call zero_grad first);
/// target parameters never receive gradient.
StepOutputs forward_views(SiameseModel& model, const Tensor& view, const Tensor& view_prime,
                          const StepOptions& options);

/// Zeroes image pixels under nearest-upsampled feature-grid masks.
Tensor mask_images(const Tensor& images, const std::vector<SuppressionMask>& masks);

}  // namespace feasc
