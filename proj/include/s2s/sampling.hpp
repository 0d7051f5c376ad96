#pragma once
// Regular-stride sampling masks and the mask-conditioned resampling operators:
// downsample (compact the sampled lattice into a dense grid), scatter (its
// right inverse), and bilinear upsampling.

#include <cmath>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

// Binary lattice mask: bit(r,c) = 1 iff r = off_row (mod stride) and
// c = off_col (mod stride). Dimensions must be divisible by the stride so the
// compacted grid is exactly (H/stride) x (W/stride).
struct SamplingMask {
  int height = 0;
  int width = 0;
  int stride = 1;
  int off_row = 0;
  int off_col = 0;

  bool at(int r, int c) const {
    return r % stride == off_row && c % stride == off_col;
  }
  int rows_out() const { return height / stride; }
  int cols_out() const { return width / stride; }
  std::int64_t popcount() const {
    return static_cast<std::int64_t>(rows_out()) * cols_out();
  }

  template <typename T>
  Tensor<T> bits() const {
    Tensor<T> b({height, width});
    for (int r = off_row; r < height; r += stride)
      for (int c = off_col; c < width; c += stride) b(r, c) = T(1);
    return b;
  }
};

inline SamplingMask make_mask(int height, int width, int stride,
                              int off_row = 0, int off_col = 0) {
  if (stride < 1) throw ConfigError("mask stride must be >= 1");
  if (off_row < 0 || off_row >= stride || off_col < 0 || off_col >= stride)
    throw ConfigError("mask offset must lie in [0, stride)");
  if (height <= 0 || width <= 0 || height % stride != 0 || width % stride != 0)
    throw ShapeError("mask dimensions must be positive and divisible by stride");
  return SamplingMask{height, width, stride, off_row, off_col};
}

// Compact the sampled positions (row-major) into a dense (H/S) x (W/S) grid.
template <typename T>
Tensor<T> downsample(const Tensor<T>& x, const SamplingMask& m) {
  if (x.rank() != 2 || x.dim(0) != m.height || x.dim(1) != m.width)
    throw ShapeError("downsample: input " + shape_str(x.shape) +
                     " does not match mask " +
                     shape_str({m.height, m.width}));
  Tensor<T> out({m.rows_out(), m.cols_out()});
  for (int r = 0; r < m.rows_out(); ++r) {
    const int sr = m.off_row + r * m.stride;
    for (int c = 0; c < m.cols_out(); ++c)
      out(r, c) = x(sr, m.off_col + c * m.stride);
  }
  return out;
}

// Embed a compact grid back onto the lattice, zero elsewhere.
// downsample(scatter(y, m), m) == y exactly.
template <typename T>
Tensor<T> scatter(const Tensor<T>& y, const SamplingMask& m) {
  if (y.rank() != 2 || y.dim(0) != m.rows_out() || y.dim(1) != m.cols_out())
    throw ShapeError("scatter: input " + shape_str(y.shape) +
                     " does not match compacted mask shape " +
                     shape_str({m.rows_out(), m.cols_out()}));
  Tensor<T> out({m.height, m.width});
  for (int r = 0; r < m.rows_out(); ++r) {
    const int tr = m.off_row + r * m.stride;
    for (int c = 0; c < m.cols_out(); ++c)
      out(tr, m.off_col + c * m.stride) = y(r, c);
  }
  return out;
}

// Bilinear upsampling by an integer factor, half-pixel (corner-aligned-false)
// convention: output pixel i samples input coordinate (i + 0.5)/f - 0.5,
// clamped at the borders. Linear in the input values; preserves constants.
template <typename T>
Tensor<T> upsample_bilinear(const Tensor<T>& x, int factor) {
  if (factor < 1) throw InvalidFactor("upsample factor must be >= 1");
  if (x.rank() != 2) throw ShapeError("upsample expects a 2D array");
  if (factor == 1) return x;
  const int h = x.dim(0), w = x.dim(1);
  const int oh = h * factor, ow = w * factor;
  Tensor<T> out({oh, ow});

  std::vector<int> c0(ow), c1(ow);
  std::vector<T> cw(ow);
  for (int j = 0; j < ow; ++j) {
    const double sc = (j + 0.5) / factor - 0.5;
    const double fl = std::floor(sc);
    int j0 = static_cast<int>(fl);
    T t = static_cast<T>(sc - fl);
    if (j0 < 0) { j0 = 0; t = T(0); }
    int j1 = j0 + 1;
    if (j1 > w - 1) { j1 = w - 1; t = T(0); }
    c0[j] = j0; c1[j] = j1; cw[j] = t;
  }
  for (int i = 0; i < oh; ++i) {
    const double sr = (i + 0.5) / factor - 0.5;
    const double fl = std::floor(sr);
    int i0 = static_cast<int>(fl);
    T u = static_cast<T>(sr - fl);
    if (i0 < 0) { i0 = 0; u = T(0); }
    int i1 = i0 + 1;
    if (i1 > h - 1) { i1 = h - 1; u = T(0); }
    for (int j = 0; j < ow; ++j) {
      const T a = x(i0, c0[j]), b = x(i0, c1[j]);
      const T c = x(i1, c0[j]), d = x(i1, c1[j]);
      const T top = a + cw[j] * (b - a);
      const T bot = c + cw[j] * (d - c);
      out(i, j) = top + u * (bot - top);
    }
  }
  return out;
}

}  // namespace s2s
