#pragma once
// Patch cropping, branch-specific augmentation, and assembly of the
// low/medium/high resolution training triples shared by both domains.

#include <cmath>
#include <optional>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/rng.hpp"
#include "s2s/sampling.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

struct PatchOrigin {
  int row = 0;
  int col = 0;
};

// Deterministic patch enumeration: origins {0, stride, 2*stride, ...} plus a
// final origin flush to the border when the last regular origin does not
// reach it.
inline std::vector<int> axis_origins(int extent, int patch, int crop_stride) {
  if (patch > extent) throw ShapeError("patch larger than grid axis");
  if (crop_stride < 1) throw ConfigError("crop stride must be >= 1");
  std::vector<int> out;
  const int last = extent - patch;
  for (int o = 0; o <= last; o += crop_stride) out.push_back(o);
  if (out.back() != last) out.push_back(last);
  return out;
}

inline std::vector<PatchOrigin> enumerate_patches(int height, int width,
                                                  int patch, int crop_stride) {
  std::vector<PatchOrigin> out;
  for (int r : axis_origins(height, patch, crop_stride))
    for (int c : axis_origins(width, patch, crop_stride))
      out.push_back({r, c});
  return out;
}

inline std::vector<PatchOrigin> random_patches(int height, int width, int patch,
                                               int count, Rng& rng) {
  if (patch > height || patch > width)
    throw ShapeError("patch larger than grid");
  std::vector<PatchOrigin> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back({static_cast<int>(rng.uniform_int(height - patch + 1)),
                   static_cast<int>(rng.uniform_int(width - patch + 1))});
  return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& grid, PatchOrigin o, int ph, int pw) {
  if (grid.rank() != 2 || o.row < 0 || o.col < 0 ||
      o.row + ph > grid.dim(0) || o.col + pw > grid.dim(1))
    throw ShapeError("crop out of bounds");
  Tensor<T> out({ph, pw});
  for (int r = 0; r < ph; ++r)
    for (int c = 0; c < pw; ++c) out(r, c) = grid(o.row + r, o.col + c);
  return out;
}

// The 8 dihedral variants of a square patch, index k in [0,8):
// k = flip * 4 + quarter_turns, flip = horizontal flip applied first.
template <typename T>
Tensor<T> dihedral_apply(const Tensor<T>& x, int k) {
  if (x.rank() != 2 || x.dim(0) != x.dim(1))
    throw ShapeError("dihedral_apply expects a square patch");
  if (k < 0 || k >= 8) throw ConfigError("dihedral variant out of range");
  const int n = x.dim(0);
  const bool flip = k >= 4;
  const int rot = k % 4;
  Tensor<T> out({n, n});
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      int sr = r, sc = c;
      // invert the rotation: out(r,c) = in(rot^-1(r,c))
      switch (rot) {
        case 0: break;
        case 1: sr = c; sc = n - 1 - r; break;          // 90 ccw output
        case 2: sr = n - 1 - r; sc = n - 1 - c; break;  // 180
        case 3: sr = n - 1 - c; sc = r; break;          // 270
      }
      if (flip) sc = n - 1 - sc;
      out(r, c) = x(sr, sc);
    }
  }
  return out;
}

// Pick one of {identity, H-flip, V-flip} x {0,90,180,270} degrees. V-flip
// composed with the rotations lands on the remaining dihedral elements, so
// the full group of order 8 is reachable.
inline int sample_dihedral(Rng& rng) {
  const int f = static_cast<int>(rng.uniform_int(3));  // 0 none, 1 H, 2 V
  const int r = static_cast<int>(rng.uniform_int(4));
  if (f == 0) return r;
  if (f == 1) return 4 + r;
  return 4 + (r + 2) % 4;  // V-flip = H-flip then 180
}

template <typename T>
struct AugmentedPatch {
  Tensor<T> values;
  Tensor<std::uint8_t> tissue;
};

// ST augmentation: exact dihedral transform, tissue transformed identically.
template <typename T>
AugmentedPatch<T> augment_st(const Tensor<T>& patch,
                             const Tensor<std::uint8_t>& tissue, Rng& rng) {
  if (!(patch.shape == tissue.shape))
    throw ShapeError("augment_st: patch/tissue shape mismatch");
  const int k = sample_dihedral(rng);
  return {dihedral_apply(patch, k), dihedral_apply(tissue, k)};
}

// Rotate about the image center by `angle_rad` with bilinear resampling and
// return the P x P crop whose center sits at the image center plus `offset`.
// Caller guarantees the crop stays inside the valid (non-padded) region.
template <typename T>
Tensor<T> rotate_crop_bilinear(const Tensor<T>& img, double angle_rad,
                               double off_r, double off_c, int P) {
  const int h = img.dim(0), w = img.dim(1);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  const double ca = std::cos(angle_rad), sa = std::sin(angle_rad);
  Tensor<T> out({P, P});
  const double half = (P - 1) / 2.0;
  for (int r = 0; r < P; ++r) {
    for (int c = 0; c < P; ++c) {
      const double dy = r - half + off_r;
      const double dx = c - half + off_c;
      // inverse rotation of the output offset
      const double sy = cy + ca * dy + sa * dx;
      const double sx = cx - sa * dy + ca * dx;
      if (sy < 0.0 || sx < 0.0 || sy > h - 1.0 || sx > w - 1.0)
        throw ShapeError("rotation sampled outside the image");
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const double fy = sy - y0, fx = sx - x0;
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double v =
          (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) +
          fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
      out(r, c) = static_cast<T>(v);
    }
  }
  return out;
}

// GNI augmentation: random flips, rotation by a uniform angle in [0, 2pi),
// then an interior P x P crop that stays inside the valid region for every
// angle (all sampled points within the inscribed disk of the image).
template <typename T>
Tensor<T> augment_gni(const Tensor<T>& image, int P, Rng& rng) {
  if (image.rank() != 2) throw ShapeError("augment_gni expects a 2D image");
  const int h = image.dim(0), w = image.dim(1);
  const double min_side = std::min(h, w);
  const double need = P * std::sqrt(2.0);
  if (min_side < need - 1e-9)
    throw ShapeError("image too small for a rotation-safe crop (need min side >= P*sqrt(2))");

  Tensor<T> img = image;
  if (rng.coin()) img = dihedral_apply(img, 4);              // H flip
  if (rng.coin()) img = dihedral_apply(img, 6);              // V flip (= H + 180)
  const double angle = rng.uniform(0.0, 2.0 * 3.14159265358979323846);

  // A P-crop centered at center+delta is valid for every angle when
  // |delta| + P*sqrt(2)/2 <= min_side/2; sample delta in the inscribed square.
  const double slack = min_side / 2.0 - P * std::sqrt(2.0) / 2.0;
  double off_r = 0.0, off_c = 0.0;
  if (slack > 1.0) {
    const double lim = slack / std::sqrt(2.0);
    off_r = rng.uniform(-lim, lim);
    off_c = rng.uniform(-lim, lim);
  }
  return rotate_crop_bilinear(img, angle, off_r, off_c, P);
}

enum class Domain { ST, GNI };

// Co-registered low/medium/high resolution views of one training example.
// x_h is absent for ST patches built from observed (medium) data only.
template <typename T>
struct PatchTriple {
  std::optional<Tensor<T>> x_h;  // P x P
  Tensor<T> x_m;                 // (P/S) x (P/S)
  Tensor<T> x_l;                 // (P/S^2) x (P/S^2)
  SamplingMask m_h;              // P x P lattice, stride S
  SamplingMask m_m;              // (P/S) x (P/S) lattice, stride S
  std::optional<Tensor<std::uint8_t>> tissue_h;  // P x P (ST only)
  std::optional<Tensor<std::uint8_t>> tissue_m;  // (P/S) x (P/S)
  Domain domain = Domain::ST;
};

// Build a triple from a dense P x P patch (GNI always; ST when dense truth
// exists, i.e. synthetic/eval data).
template <typename T>
PatchTriple<T> make_triple_from_dense(const Tensor<T>& x_h, int S,
                                      Domain domain,
                                      const Tensor<std::uint8_t>* tissue_h =
                                          nullptr) {
  if (x_h.rank() != 2 || x_h.dim(0) != x_h.dim(1))
    throw ShapeError("make_triple: dense patch must be square");
  const int P = x_h.dim(0);
  if (S < 1 || P % (S * S) != 0)
    throw ShapeError("make_triple: patch side must be divisible by S^2");
  PatchTriple<T> t;
  t.domain = domain;
  t.m_h = make_mask(P, P, S);
  t.m_m = make_mask(P / S, P / S, S);
  t.x_h = x_h;
  t.x_m = downsample(x_h, t.m_h);
  t.x_l = downsample(t.x_m, t.m_m);
  if (tissue_h != nullptr) {
    t.tissue_h = *tissue_h;
    Tensor<std::uint8_t> tm = downsample(*tissue_h, t.m_h);
    t.tissue_m = std::move(tm);
  }
  return t;
}

// Build a triple when only the observed (medium) level exists: the densest
// available level becomes x_m and one further downsample yields x_l.
template <typename T>
PatchTriple<T> make_triple_from_medium(const Tensor<T>& x_m, int S, int P,
                                       const Tensor<std::uint8_t>* tissue_m =
                                           nullptr) {
  if (x_m.rank() != 2 || x_m.dim(0) != x_m.dim(1))
    throw ShapeError("make_triple: medium patch must be square");
  if (S < 1 || P % (S * S) != 0 || x_m.dim(0) * S != P)
    throw ShapeError("make_triple: medium patch side must equal P/S with P divisible by S^2");
  PatchTriple<T> t;
  t.domain = Domain::ST;
  t.m_h = make_mask(P, P, S);
  t.m_m = make_mask(P / S, P / S, S);
  t.x_m = x_m;
  t.x_l = downsample(x_m, t.m_m);
  if (tissue_m != nullptr) t.tissue_m = *tissue_m;
  return t;
}

}  // namespace s2s
