#pragma once
// Evaluation triple: MAE, PCC, SSIM over a region mask. All reductions in
// double. SSIM follows the standard formulation: 11x11 Gaussian window,
// sigma 1.5, K1 = 0.01, K2 = 0.03; the dynamic range is taken from the
// reference grid over the region; the local map is averaged over region
// centers whose full window lies inside the grid.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

struct EvalReport {
  double mae = 0.0;
  double pcc = 0.0;
  double ssim = 0.0;
  std::int64_t region_size = 0;
  std::string gene;
  std::string dataset;
};

namespace metrics_detail {

template <typename T>
void check_pair(const Tensor<T>& a, const Tensor<T>& b,
                const Tensor<std::uint8_t>& region) {
  if (!(a.shape == b.shape) || !(a.shape == region.shape) || a.rank() != 2)
    throw ShapeError("metrics: inputs must be equally shaped 2D grids");
}

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

inline std::vector<double> gaussian_kernel_2d() {
  std::vector<double> k(kSsimWindow * kSsimWindow);
  const int c = kSsimWindow / 2;
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i)
    for (int j = 0; j < kSsimWindow; ++j) {
      const double d2 = (i - c) * (i - c) + (j - c) * (j - c);
      k[i * kSsimWindow + j] =
          std::exp(-d2 / (2.0 * kSsimSigma * kSsimSigma));
      sum += k[i * kSsimWindow + j];
    }
  for (auto& v : k) v /= sum;
  return k;
}

}  // namespace metrics_detail

template <typename T>
double mae(const Tensor<T>& a, const Tensor<T>& b,
           const Tensor<std::uint8_t>& region) {
  metrics_detail::check_pair(a, b, region);
  double acc = 0.0;
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (region.data[i] == 0) continue;
    acc += std::abs(static_cast<double>(a.data[i]) -
                    static_cast<double>(b.data[i]));
    ++n;
  }
  if (n == 0) throw EmptyRegion("mae: region is empty");
  return acc / static_cast<double>(n);
}

template <typename T>
double pcc(const Tensor<T>& a, const Tensor<T>& b,
           const Tensor<std::uint8_t>& region) {
  metrics_detail::check_pair(a, b, region);
  double sa = 0.0, sb = 0.0;
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (region.data[i] == 0) continue;
    sa += static_cast<double>(a.data[i]);
    sb += static_cast<double>(b.data[i]);
    ++n;
  }
  if (n == 0) throw EmptyRegion("pcc: region is empty");
  const double ma = sa / n, mb = sb / n;
  double va = 0.0, vb = 0.0, cov = 0.0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (region.data[i] == 0) continue;
    const double da = static_cast<double>(a.data[i]) - ma;
    const double db = static_cast<double>(b.data[i]) - mb;
    va += da * da;
    vb += db * db;
    cov += da * db;
  }
  if (va == 0.0 || vb == 0.0)
    throw DegenerateInput("pcc: constant input over region");
  return cov / std::sqrt(va * vb);
}

// Dynamic range may be pinned externally (for symmetry checks); by default
// it comes from `a`, treated as the reference.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b,
            const Tensor<std::uint8_t>& region, double fixed_range = -1.0) {
  using namespace metrics_detail;
  check_pair(a, b, region);
  const int H = a.dim(0), W = a.dim(1);
  if (H < kSsimWindow || W < kSsimWindow)
    throw ShapeError("ssim: grid smaller than the SSIM window");

  double lo = 0.0, hi = 0.0;
  bool seen = false;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (region.data[i] == 0) continue;
    const double v = static_cast<double>(a.data[i]);
    if (!seen) { lo = hi = v; seen = true; }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!seen) throw EmptyRegion("ssim: region is empty");
  const double L = fixed_range > 0.0 ? fixed_range : hi - lo;
  if (L <= 0.0) throw DegenerateInput("ssim: zero dynamic range");
  const double C1 = (kSsimK1 * L) * (kSsimK1 * L);
  const double C2 = (kSsimK2 * L) * (kSsimK2 * L);

  const auto kern = gaussian_kernel_2d();
  const int r = kSsimWindow / 2;
  double acc = 0.0;
  std::int64_t n = 0;
  for (int y = r; y < H - r; ++y) {
    for (int x = r; x < W - r; ++x) {
      if (region(y, x) == 0) continue;
      double mu_a = 0.0, mu_b = 0.0;
      double raa = 0.0, rbb = 0.0, rab = 0.0;
      for (int i = 0; i < kSsimWindow; ++i)
        for (int j = 0; j < kSsimWindow; ++j) {
          const double w = kern[i * kSsimWindow + j];
          const double av = a(y + i - r, x + j - r);
          const double bv = b(y + i - r, x + j - r);
          mu_a += w * av;
          mu_b += w * bv;
          raa += w * av * av;
          rbb += w * bv * bv;
          rab += w * av * bv;
        }
      const double var_a = raa - mu_a * mu_a;
      const double var_b = rbb - mu_b * mu_b;
      const double cov = rab - mu_a * mu_b;
      const double num = (2.0 * mu_a * mu_b + C1) * (2.0 * cov + C2);
      const double den =
          (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
      acc += num / den;
      ++n;
    }
  }
  if (n == 0)
    throw EmptyRegion("ssim: no region centers with a full interior window");
  return acc / static_cast<double>(n);
}

template <typename T>
EvalReport evaluate(const Tensor<T>& pred, const Tensor<T>& truth,
                    const Tensor<std::uint8_t>& region) {
  EvalReport r;
  r.mae = mae(truth, pred, region);
  r.pcc = pcc(truth, pred, region);
  r.ssim = ssim(truth, pred, region);
  std::int64_t n = 0;
  for (const auto& v : region.data) n += v != 0 ? 1 : 0;
  r.region_size = n;
  return r;
}

}  // namespace s2s
