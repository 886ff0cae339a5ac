#pragma once

// Independent brute-force oracles used only by tests. None of these call the
// library paths they check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "feasc/rng.hpp"
#include "feasc/tensor.hpp"

namespace feasc::oracle {

/// Per-location loop over channels, sample-major.
inline std::vector<double> channel_sum(const std::vector<double>& f, int c, int h, int w) {
  std::vector<double> m(static_cast<std::size_t>(h) * w, 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double s = 0;
      for (int k = 0; k < c; ++k) s += f[(static_cast<std::size_t>(k) * h + i) * w + j];
      m[static_cast<std::size_t>(i) * w + j] = s;
    }
  return m;
}

/// A cell is selected when fewer than k cells outrank it. A cell outranks
/// another when its value is more extreme or equal with a smaller index.
inline std::vector<std::uint8_t> rank_select(const std::vector<double>& v, int k, bool highest) {
  const int n = static_cast<int>(v.size());
  std::vector<std::uint8_t> out(n, 0);
  for (int a = 0; a < n; ++a) {
    int beaten_by = 0;
    for (int b = 0; b < n; ++b) {
      if (b == a) continue;
      const bool more = highest ? v[b] > v[a] : v[b] < v[a];
      if (more || (v[b] == v[a] && b < a)) ++beaten_by;
    }
    out[a] = beaten_by < k ? 1 : 0;
  }
  return out;
}

/// Half-away-from-zero rounding written out by hand.
inline int round_half_away(double x) {
  return x >= 0 ? static_cast<int>(std::floor(x + 0.5)) : -static_cast<int>(std::floor(-x + 0.5));
}

inline std::vector<double> masked_product(const std::vector<double>& f, const std::vector<std::uint8_t>& mask, int c,
                                          int h, int w) {
  std::vector<double> out(f.size());
  for (int k = 0; k < c; ++k)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j) {
        const std::size_t idx = (static_cast<std::size_t>(k) * h + i) * w + j;
        out[idx] = (1.0 - mask[static_cast<std::size_t>(i) * w + j]) * f[idx];
      }
  return out;
}

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Central difference of f with respect to x[index].
inline double central_difference(const std::function<double()>& f, double& x, double h = 1e-6) {
  const double saved = x;
  x = saved + h;
  const double up = f();
  x = saved - h;
  const double down = f();
  x = saved;
  return (up - down) / (2 * h);
}

/// |a - b| <= rel * max(|a|, |b|) + abs_floor.
inline bool close_relative(double a, double b, double rel, double abs_floor = 1e-9) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace feasc::oracle
