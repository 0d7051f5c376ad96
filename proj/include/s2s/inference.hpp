#pragma once
// Whole-slide reconstruction: run the cascade over sliding windows of the
// sparse (medium-resolution) slide, take the final stage output per window,
// and blend overlaps by weighted averaging on an accumulator canvas. A final
// hard data-consistency pass over the stitched slide is applied when the
// model config asks for it.

#include <cmath>
#include <string>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/network.hpp"
#include "s2s/patches.hpp"
#include "s2s/sampling.hpp"
#include "s2s/st_data.hpp"
#include "s2s/tensor.hpp"
#include "s2s/workers.hpp"

namespace s2s {

struct SlideCanvas {
  Tensor<double> value_sum;
  Tensor<double> weight_sum;

  SlideCanvas() = default;
  SlideCanvas(int h, int w)
      : value_sum({h, w}), weight_sum({h, w}) {}

  void add_window(const Tensor<float>& pred, int oy, int ox,
                  const Tensor<float>& weights) {
    if (!(pred.shape == weights.shape))
      throw ShapeError("canvas: prediction/weight shape mismatch");
    for (int r = 0; r < pred.dim(0); ++r)
      for (int c = 0; c < pred.dim(1); ++c) {
        value_sum(oy + r, ox + c) +=
            static_cast<double>(pred(r, c)) * weights(r, c);
        weight_sum(oy + r, ox + c) += weights(r, c);
      }
  }
};

struct FinalizedSlide {
  Tensor<float> values;
  Tensor<std::uint8_t> covered;
};

// value_sum / max(weight_sum, eps); cells never covered are zero and flagged.
inline FinalizedSlide finalize(const SlideCanvas& canvas) {
  constexpr double kEps = 1e-12;
  FinalizedSlide out;
  out.values = Tensor<float>({canvas.value_sum.dim(0), canvas.value_sum.dim(1)});
  out.covered =
      Tensor<std::uint8_t>({canvas.value_sum.dim(0), canvas.value_sum.dim(1)});
  for (std::int64_t i = 0; i < canvas.value_sum.numel(); ++i) {
    const double w = canvas.weight_sum.data[i];
    out.covered.data[i] = w > 0.0 ? 1 : 0;
    out.values.data[i] = static_cast<float>(
        canvas.value_sum.data[i] / std::max(w, kEps));
  }
  return out;
}

// Positive-everywhere Hann-style weights evaluated at half-integer positions,
// so flush-to-border windows still cover slide corners.
inline Tensor<float> window_weights(int P, const std::string& weighting) {
  Tensor<float> w({P, P});
  if (weighting == "uniform") {
    for (auto& v : w.data) v = 1.0f;
    return w;
  }
  if (weighting != "hann")
    throw ConfigError("unknown window weighting: " + weighting);
  std::vector<float> h(static_cast<std::size_t>(P));
  for (int i = 0; i < P; ++i) {
    const double s = std::sin(3.14159265358979323846 * (i + 0.5) / P);
    h[static_cast<std::size_t>(i)] = static_cast<float>(s * s);
  }
  for (int r = 0; r < P; ++r)
    for (int c = 0; c < P; ++c)
      w(r, c) = h[static_cast<std::size_t>(r)] * h[static_cast<std::size_t>(c)];
  return w;
}

struct InferResult {
  GeneGrid grid;                 // reconstructed values + upsampled tissue
  Tensor<std::uint8_t> covered;  // cells touched by at least one window
};

// window/hr_stride are in high-resolution units; the slide is the observed
// medium grid. The last cascade stage per window is stitched.
inline InferResult infer_slide(const CdcinModel<float>& model,
                               const GeneGrid& slide_medium, int stride_s,
                               int window, int hr_stride,
                               const std::string& weighting = "uniform") {
  if (window < 1 || window % (stride_s * model.cfg.window_size) != 0)
    throw ConfigError(
        "window must be a positive multiple of stride * model window_size");
  if (hr_stride < 1 || hr_stride % stride_s != 0)
    throw ConfigError("window stride must be a positive multiple of stride");
  const int wm = window / stride_s;          // window side on the medium grid
  const int sm = hr_stride / stride_s;       // step on the medium grid
  const int Hm = slide_medium.height(), Wm = slide_medium.width();
  if (Hm < wm || Wm < wm)
    throw ConfigError("slide smaller than one inference window");
  const int H = Hm * stride_s, W = Wm * stride_s;

  const auto origins = enumerate_patches(Hm, Wm, wm, sm);
  const Tensor<float> weights = window_weights(window, weighting);
  const SamplingMask win_mask = make_mask(window, window, stride_s);

  std::vector<Tensor<float>> preds(origins.size());
  parallel_for(static_cast<int>(origins.size()), [&](int i) {
    const auto& o = origins[static_cast<std::size_t>(i)];
    Tensor<float> x_m = crop(slide_medium.values, o, wm, wm);
    Tape<float> tape(false);
    auto bound = model.bind(tape, false);
    auto outs = model.forward(tape, bound, x_m, win_mask);
    const auto& last = tape.val(outs.back());
    Tensor<float> pred({window, window});
    pred.data = last.data;
    preds[static_cast<std::size_t>(i)] = std::move(pred);
  });

  SlideCanvas canvas(H, W);
  for (std::size_t i = 0; i < origins.size(); ++i)
    canvas.add_window(preds[i], origins[i].row * stride_s,
                      origins[i].col * stride_s, weights);

  FinalizedSlide fin = finalize(canvas);
  if (model.cfg.final_dc_at_inference) {
    const SamplingMask slide_mask = make_mask(H, W, stride_s);
    fin.values = apply_final_dc(fin.values, slide_medium.values, slide_mask);
  }

  InferResult result;
  result.grid.gene = slide_medium.gene;
  result.grid.values = std::move(fin.values);
  result.covered = std::move(fin.covered);
  // block-replicated tissue at the target resolution
  result.grid.tissue = Tensor<std::uint8_t>({H, W});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      result.grid.tissue(y, x) =
          slide_medium.tissue(y / stride_s, x / stride_s);
  for (std::int64_t i = 0; i < result.grid.values.numel(); ++i)
    if (result.covered.data[i] == 0) result.grid.values.data[i] = 0.0f;
  return result;
}

}  // namespace s2s
