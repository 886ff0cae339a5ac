#include "feasc/suppression.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "feasc/kernels.hpp"
#include "feasc/rng.hpp"

namespace feasc {

FeatureMap::FeatureMap(int c, int h, int w, Scalar fill)
    : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, fill) {}

void FeatureMap::validate() const {
  if (channels < 1 || height < 1 || width < 1)
    throw ValidationError("feature map dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(channels) * height * width)
    throw ValidationError("feature map value count does not match C*H*W");
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    if (!std::isfinite(values[idx])) {
      const std::size_t plane = static_cast<std::size_t>(height) * width;
      std::ostringstream os;
      os << "non-finite feature value at (k=" << idx / plane << ", i=" << (idx % plane) / width
         << ", j=" << idx % width << ")";
      throw ValidationError(os.str());
    }
  }
}

void RampSchedule::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ValidationError("ramp alpha must lie in (0, 1]");
  if (beta < 1) throw ValidationError("ramp beta must be >= 1");
}

int suppressed_count(double eta, int cells) {
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("suppression ratio eta must lie in [0, 1]");
  return static_cast<int>(std::lround(eta * cells));
}

ResponseMap compute_response_map(const FeatureMap& features) {
  features.validate();
  ResponseMap m{features.height, features.width, {}};
  const std::size_t plane = static_cast<std::size_t>(features.height) * features.width;
  m.values.assign(plane, 0);
  for (int k = 0; k < features.channels; ++k)
    for (std::size_t p = 0; p < plane; ++p) m.values[p] += features.values[k * plane + p];
  return m;
}

double ramp_up_eta(int epoch, const RampSchedule& schedule) {
  schedule.validate();
  if (epoch < 0) throw ValidationError("epoch must be non-negative");
  if (epoch >= schedule.beta) return schedule.alpha;
  const double gap = 1.0 - static_cast<double>(epoch) / schedule.beta;
  return schedule.alpha * std::exp(-5.0 * gap * gap);
}

namespace {

void check_response(const ResponseMap& response) {
  if (response.height < 1 || response.width < 1) throw ValidationError("response map dimensions must be positive");
  if (response.values.size() != static_cast<std::size_t>(response.height) * response.width)
    throw ValidationError("response map value count does not match H*W");
  for (Scalar v : response.values)
    if (!std::isfinite(v)) throw ValidationError("non-finite response value");
}

SuppressionMask select_ranked(const ResponseMap& response, double eta, bool highest) {
  check_response(response);
  const int cells = response.height * response.width;
  const int k = suppressed_count(eta, cells);
  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  const auto& v = response.values;
  auto before = [&](int a, int b) {
    if (v[a] != v[b]) return highest ? v[a] > v[b] : v[a] < v[b];
    return a < b;
  };
  std::partial_sort(order.begin(), order.begin() + k, order.end(), before);
  SuppressionMask mask{response.height, response.width, std::vector<std::uint8_t>(cells, 0), k};
  for (int r = 0; r < k; ++r) mask.values[order[r]] = 1;
  return mask;
}

}  // namespace

SuppressionMask build_mask(const ResponseMap& response, double eta) { return select_ranked(response, eta, true); }

SuppressionMask mask_low_response(const ResponseMap& response, double eta) {
  return select_ranked(response, eta, false);
}

SuppressionMask mask_random(int height, int width, double eta, std::uint64_t seed) {
  if (height < 1 || width < 1) throw ValidationError("mask dimensions must be positive");
  const int cells = height * width;
  const int k = suppressed_count(eta, cells);
  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  // partial Fisher-Yates: the first k slots are a uniform k-subset
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(rng.index(static_cast<std::uint64_t>(cells - i)));
    std::swap(order[i], order[j]);
  }
  SuppressionMask mask{height, width, std::vector<std::uint8_t>(cells, 0), k};
  for (int i = 0; i < k; ++i) mask.values[order[i]] = 1;
  return mask;
}

Scalar mask_threshold(const ResponseMap& response, const SuppressionMask& mask) {
  Scalar omega = std::numeric_limits<Scalar>::infinity();
  for (std::size_t p = 0; p < mask.values.size(); ++p)
    if (mask.values[p]) omega = std::min(omega, response.values[p]);
  return omega;
}

FeatureMap suppress_features(const FeatureMap& features, const SuppressionMask& mask) {
  if (mask.height != features.height || mask.width != features.width)
    throw ValidationError("mask shape does not match feature map spatial shape");
  FeatureMap out = features;
  const std::size_t plane = static_cast<std::size_t>(features.height) * features.width;
  for (int k = 0; k < features.channels; ++k)
    for (std::size_t p = 0; p < plane; ++p)
      if (mask.values[p]) out.values[k * plane + p] = 0;
  return out;
}

Tensor response_maps(const Tensor& features) { return kernels::channel_sum(features); }

std::vector<SuppressionMask> build_batch_masks(const Tensor& features, double eta, MaskSource source,
                                               std::uint64_t seed) {
  if (features.rank() != 4) throw ValidationError("batch masks expect NCHW features");
  const int n_batch = features.dim(0), h = features.dim(2), w = features.dim(3);
  std::vector<SuppressionMask> masks(n_batch);
  if (source == MaskSource::random) {
    for (int n = 0; n < n_batch; ++n) masks[n] = mask_random(h, w, eta, derive_seed(seed, n));
    return masks;
  }
  const Tensor maps = response_maps(features);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_batch; ++n) {
    ResponseMap m{h, w, std::vector<Scalar>(maps.data() + n * plane, maps.data() + (n + 1) * plane)};
    masks[n] = source == MaskSource::high_response ? build_mask(m, eta) : mask_low_response(m, eta);
  }
  return masks;
}

Tensor suppress_batch(const Tensor& features, const std::vector<SuppressionMask>& masks) {
  if (features.rank() != 4 || static_cast<int>(masks.size()) != features.dim(0))
    throw ValidationError("one mask per sample required");
  const std::size_t plane = static_cast<std::size_t>(features.dim(2)) * features.dim(3);
  std::vector<std::uint8_t> flat;
  flat.reserve(plane * masks.size());
  for (const auto& m : masks) {
    if (m.height != features.dim(2) || m.width != features.dim(3))
      throw ValidationError("mask shape does not match feature map spatial shape");
    flat.insert(flat.end(), m.values.begin(), m.values.end());
  }
  return kernels::apply_spatial_mask(features, flat);
}

namespace {

template <class T>
void put_le(std::ostream& os, T value) {
  auto bits = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  os.write(bits.data(), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  std::array<char, sizeof(T)> bits{};
  if (!is.read(bits.data(), sizeof(T))) throw ValidationError("truncated grid stream");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  return std::bit_cast<T>(bits);
}

void put_header(std::ostream& os, int h, int w) {
  put_le<std::int32_t>(os, 1);
  put_le<std::int32_t>(os, h);
  put_le<std::int32_t>(os, w);
}

std::pair<int, int> get_header(std::istream& is) {
  const auto c = get_le<std::int32_t>(is);
  const auto h = get_le<std::int32_t>(is);
  const auto w = get_le<std::int32_t>(is);
  if (c != 1 || h < 1 || w < 1) throw ValidationError("unsupported grid header");
  return {h, w};
}

}  // namespace

void write_grid(std::ostream& os, const ResponseMap& response) {
  put_header(os, response.height, response.width);
  for (Scalar v : response.values) put_le<float>(os, static_cast<float>(v));
}

void write_grid(std::ostream& os, const SuppressionMask& mask) {
  put_header(os, mask.height, mask.width);
  os.write(reinterpret_cast<const char*>(mask.values.data()), static_cast<std::streamsize>(mask.values.size()));
}

ResponseMap read_response_grid(std::istream& is) {
  auto [h, w] = get_header(is);
  ResponseMap m{h, w, std::vector<Scalar>(static_cast<std::size_t>(h) * w)};
  for (auto& v : m.values) v = get_le<float>(is);
  return m;
}

SuppressionMask read_mask_grid(std::istream& is) {
  auto [h, w] = get_header(is);
  SuppressionMask m{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w), 0};
  if (!is.read(reinterpret_cast<char*>(m.values.data()), static_cast<std::streamsize>(m.values.size())))
    throw ValidationError("truncated grid stream");
  for (auto v : m.values) {
    if (v > 1) throw ValidationError("mask grid holds a non-binary value");
    m.count_suppressed += v;
  }
  return m;
}

}  // namespace feasc
