#pragma once
// Cascade-weighted L1 losses. Four components: sparser-to-sparse and
// sparse-to-dense for the ST branch (tissue-restricted), and their
// fully-supervised GNI counterparts. Stage k of K carries weight k/K.
//
// Plain functions reduce in double and return doubles; tape builders mirror
// the same arithmetic for backward.

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/patches.hpp"
#include "s2s/sampling.hpp"
#include "s2s/tape.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

struct LossBreakdown {
  double st_sparser = 0.0;  // L^st_m
  double st_dense = 0.0;    // L^st_h
  double gni_sparser = 0.0; // L^gni_m
  double gni_dense = 0.0;   // L^gni_h
  double total = 0.0;
  double lambda = 10.0;
};

struct LossOptions {
  // Mean over in-tissue positions (default) or the literal fixed denominator
  // (full patch area) with out-of-tissue residuals zeroed.
  bool literal_denominator = false;
  bool tissue_on_sparser = true;
  bool tissue_on_dense = true;
};

namespace detail {

template <typename T>
double region_popcount(const Tensor<T>& region) {
  double n = 0;
  for (const auto& v : region.data) n += v != T(0) ? 1.0 : 0.0;
  return n;
}

}  // namespace detail

// sum_{k=1..K} (k/K) * mean_region |outputs[k] - target|.
template <typename T>
double cascade_l1(const std::vector<Tensor<T>>& outputs,
                  const Tensor<T>& target,
                  const Tensor<std::uint8_t>* region = nullptr,
                  bool literal_denominator = false) {
  if (outputs.empty()) throw ShapeError("cascade_l1: no cascade outputs");
  const int K = static_cast<int>(outputs.size());
  double denom = static_cast<double>(target.numel());
  if (region != nullptr) {
    if (!(region->shape == target.shape))
      throw ShapeError("cascade_l1: region shape mismatch");
    const double pop = detail::region_popcount(*region);
    if (pop == 0.0) throw EmptyRegion("cascade_l1: region is empty");
    if (!literal_denominator) denom = pop;
  }
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto& out = outputs[k];
    if (!(out.shape == target.shape))
      throw ShapeError("cascade_l1: output/target shape mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < out.numel(); ++i) {
      if (region != nullptr && region->data[i] == 0) continue;
      acc += std::abs(static_cast<double>(out.data[i]) -
                      static_cast<double>(target.data[i]));
    }
    total += (static_cast<double>(k + 1) / K) * (acc / denom);
  }
  return total;
}

// ST losses from the two forward passes. Both compare against x_m at the
// medium lattice; the dense branch is first gathered through m_h.
template <typename T>
std::pair<double, double> st_losses(
    const std::vector<Tensor<T>>& outputs_m,
    const std::vector<Tensor<T>>& outputs_h, const PatchTriple<T>& triple,
    const LossOptions& opt = {}) {
  if (triple.domain != Domain::ST)
    throw ConfigError("st_losses: not an ST triple");
  const Tensor<std::uint8_t>* tissue =
      triple.tissue_m.has_value() ? &*triple.tissue_m : nullptr;
  std::vector<Tensor<T>> gathered;
  gathered.reserve(outputs_h.size());
  for (const auto& oh : outputs_h) gathered.push_back(downsample(oh, triple.m_h));
  const double lm = cascade_l1(outputs_m, triple.x_m,
                               opt.tissue_on_sparser ? tissue : nullptr,
                               opt.literal_denominator);
  const double lh = cascade_l1(gathered, triple.x_m,
                               opt.tissue_on_dense ? tissue : nullptr,
                               opt.literal_denominator);
  return {lm, lh};
}

// GNI losses: sparser branch against x_m, dense branch against x_h at full
// resolution. No region restriction.
template <typename T>
std::pair<double, double> gni_losses(
    const std::vector<Tensor<T>>& outputs_m,
    const std::vector<Tensor<T>>& outputs_h, const PatchTriple<T>& triple) {
  if (triple.domain != Domain::GNI)
    throw ConfigError("gni_losses: not a GNI triple");
  if (!triple.x_h.has_value())
    throw ConfigError("gni_losses: dense truth missing");
  const double lm = cascade_l1(outputs_m, triple.x_m);
  const double lh = cascade_l1(outputs_h, *triple.x_h);
  return {lm, lh};
}

inline LossBreakdown total_loss(double st_m, double st_h, double gni_m,
                                double gni_h, double lambda) {
  for (double v : {st_m, st_h, gni_m, gni_h, lambda})
    if (!std::isfinite(v)) throw NumericalError("non-finite loss component");
  LossBreakdown b;
  b.st_sparser = st_m;
  b.st_dense = st_h;
  b.gni_sparser = gni_m;
  b.gni_dense = gni_h;
  b.lambda = lambda;
  b.total = lambda * (st_m + st_h) + (gni_m + gni_h);
  return b;
}

// ---- tape-side builders (same arithmetic, differentiable) ----

namespace tape_loss {

// Region weights as a [1,H,W]-shaped tensor matching network outputs.
template <typename T>
std::shared_ptr<Tensor<T>> region_weights(const Tensor<std::uint8_t>& region) {
  auto w = std::make_shared<Tensor<T>>(
      std::vector<int>{1, region.dim(0), region.dim(1)});
  for (std::int64_t i = 0; i < region.numel(); ++i)
    w->data[i] = region.data[i] != 0 ? T(1) : T(0);
  return w;
}

// outputs: K cascade stage ids shaped [1,H,W]; target constant.
template <typename T>
typename Tape<T>::Id cascade_l1(Tape<T>& tape,
                                const std::vector<typename Tape<T>::Id>& outs,
                                const Tensor<T>& target2d,
                                const Tensor<std::uint8_t>* region,
                                bool literal_denominator) {
  const int K = static_cast<int>(outs.size());
  Tensor<T> t3({1, target2d.dim(0), target2d.dim(1)});
  t3.data = target2d.data;
  const auto tgt = tape.leaf(std::move(t3), false);
  std::shared_ptr<Tensor<T>> w;
  double denom = static_cast<double>(target2d.numel());
  if (region != nullptr) {
    w = region_weights<T>(*region);
    const double pop = detail::region_popcount(*region);
    if (pop == 0.0) throw EmptyRegion("cascade_l1: region is empty");
    if (!literal_denominator) denom = pop;
  }
  std::vector<typename Tape<T>::Id> terms;
  std::vector<double> coeffs;
  for (int k = 0; k < K; ++k) {
    auto diff = tape.abs_op(tape.sub(outs[k], tgt));
    terms.push_back(tape.mean_weighted(diff, w, denom));
    coeffs.push_back(static_cast<double>(k + 1) / K);
  }
  return tape.weighted_sum(terms, coeffs);
}

// Gather one [1,P,P] stage output through the high-resolution mask to the
// medium lattice, as a differentiable op.
template <typename T>
typename Tape<T>::Id downsample_stage(Tape<T>& tape,
                                      typename Tape<T>::Id out_h,
                                      const SamplingMask& m) {
  auto idx = std::make_shared<std::vector<int>>();
  idx->reserve(static_cast<std::size_t>(m.popcount()));
  for (int r = 0; r < m.rows_out(); ++r)
    for (int c = 0; c < m.cols_out(); ++c)
      idx->push_back((m.off_row + r * m.stride) * m.width +
                     (m.off_col + c * m.stride));
  return tape.gather(out_h, idx, {1, m.rows_out(), m.cols_out()});
}

}  // namespace tape_loss

}  // namespace s2s
