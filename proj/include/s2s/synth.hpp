#pragma once
// Synthetic benchmark data: Gaussian-blob expression fields with optional
// noise and a tissue shape, the sparse-observation simulator, classical
// interpolation baselines, and a procedural grayscale corpus usable in place
// of a natural-image directory.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/rng.hpp"
#include "s2s/sampling.hpp"
#include "s2s/st_data.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

enum class TissueShape { Full, Disk, BlobUnion };

struct SynthSpec {
  int height = 128;
  int width = 128;
  int num_blobs = 12;
  double blob_sigma_min = 2.0;
  double blob_sigma_max = 8.0;
  double amp_min = 0.5;
  double amp_max = 3.0;
  double noise_sigma = 0.0;
  TissueShape tissue = TissueShape::Full;
  std::uint64_t seed = 7;

  void validate() const {
    if (height <= 0 || width <= 0) throw ConfigError("field dimensions must be positive");
    if (num_blobs < 0) throw ConfigError("num_blobs must be >= 0");
    if (blob_sigma_min <= 0.0 || blob_sigma_max < blob_sigma_min)
      throw ConfigError("blob sigma range invalid");
    if (amp_max < amp_min) throw ConfigError("amplitude range invalid");
    if (noise_sigma < 0.0) throw ConfigError("noise sigma must be >= 0");
  }
};

inline TissueShape tissue_shape_from_string(const std::string& s) {
  if (s == "full") return TissueShape::Full;
  if (s == "disk") return TissueShape::Disk;
  if (s == "blob-union") return TissueShape::BlobUnion;
  throw ConfigError("unknown tissue shape: " + s);
}

inline std::string tissue_shape_to_string(TissueShape t) {
  switch (t) {
    case TissueShape::Full: return "full";
    case TissueShape::Disk: return "disk";
    default: return "blob-union";
  }
}

// Sum of Gaussian blobs with random centers/sigmas/amplitudes, plus optional
// pixelwise Gaussian noise, clipped at zero and masked by the tissue shape.
inline GeneGrid gen_field(const SynthSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x5f1e1d));
  const int H = spec.height, W = spec.width;

  struct Blob {
    double cy, cx, sigma, amp;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < spec.num_blobs; ++i)
    blobs.push_back({rng.uniform(0.0, H - 1.0), rng.uniform(0.0, W - 1.0),
                     rng.uniform(spec.blob_sigma_min, spec.blob_sigma_max),
                     rng.uniform(spec.amp_min, spec.amp_max)});

  GeneGrid g;
  g.gene = "SYNTH";
  g.values = Tensor<float>({H, W});
  g.tissue = Tensor<std::uint8_t>({H, W});

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double v = 0.0;
      for (const auto& b : blobs) {
        const double d2 = (y - b.cy) * (y - b.cy) + (x - b.cx) * (x - b.cx);
        v += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
      }
      g.values(y, x) = static_cast<float>(v);
    }

  switch (spec.tissue) {
    case TissueShape::Full:
      for (auto& t : g.tissue.data) t = 1;
      break;
    case TissueShape::Disk: {
      const double cy = (H - 1) / 2.0, cx = (W - 1) / 2.0;
      const double rad = 0.45 * std::min(H, W);
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
          g.tissue(y, x) =
              ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= rad * rad) ? 1 : 0;
      break;
    }
    case TissueShape::BlobUnion:
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          bool in = false;
          for (const auto& b : blobs) {
            const double d2 =
                (y - b.cy) * (y - b.cy) + (x - b.cx) * (x - b.cx);
            if (d2 <= (2.5 * b.sigma) * (2.5 * b.sigma)) { in = true; break; }
          }
          g.tissue(y, x) = in ? 1 : 0;
        }
      break;
  }

  if (spec.noise_sigma > 0.0)
    for (std::int64_t i = 0; i < g.values.numel(); ++i)
      g.values.data[i] +=
          static_cast<float>(rng.normal(0.0, spec.noise_sigma));

  for (std::int64_t i = 0; i < g.values.numel(); ++i) {
    if (g.tissue.data[i] == 0) g.values.data[i] = 0.0f;
    else if (g.values.data[i] < 0.0f) g.values.data[i] = 0.0f;
  }
  return g;
}

// Observe the dense truth on a stride-S lattice: the compacted medium grid
// plus the mask that places it back on the full-resolution lattice.
inline std::pair<GeneGrid, SamplingMask> simulate_sparse(const GeneGrid& truth,
                                                         int S) {
  const SamplingMask m = make_mask(truth.height(), truth.width(), S);
  GeneGrid sparse;
  sparse.gene = truth.gene;
  sparse.values = downsample(truth.values, m);
  sparse.tissue = downsample(truth.tissue, m);
  return {std::move(sparse), m};
}

namespace baseline_detail {

inline int clampi(int v, int lo, int hi) {
  return v < lo ? lo : (v > hi ? hi : v);
}

// Keys cubic convolution kernel, a = -0.5.
inline double cubic_w(double t) {
  t = std::abs(t);
  if (t <= 1.0) return 1.5 * t * t * t - 2.5 * t * t + 1.0;
  if (t < 2.0) return -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0;
  return 0.0;
}

}  // namespace baseline_detail

// Classical upsamplers used as references the learned model must beat.
// Written independently of sampling::upsample_bilinear (per-pixel gather with
// explicit weights) so the two can cross-check each other.
inline Tensor<float> interpolate_grid(const Tensor<float>& x, int factor,
                                      const std::string& method) {
  using baseline_detail::clampi;
  if (factor < 1) throw InvalidFactor("interpolation factor must be >= 1");
  if (x.rank() != 2) throw ShapeError("interpolate_grid expects a 2D array");
  const int h = x.dim(0), w = x.dim(1);
  const int oh = h * factor, ow = w * factor;
  Tensor<float> out({oh, ow});

  if (method == "nearest") {
    for (int i = 0; i < oh; ++i) {
      const int si = clampi(static_cast<int>(std::floor((i + 0.5) / factor)),
                            0, h - 1);
      for (int j = 0; j < ow; ++j) {
        const int sj = clampi(
            static_cast<int>(std::floor((j + 0.5) / factor)), 0, w - 1);
        out(i, j) = x(si, sj);
      }
    }
    return out;
  }
  if (method == "bilinear") {
    for (int i = 0; i < oh; ++i) {
      const double sy = (i + 0.5) / factor - 0.5;
      for (int j = 0; j < ow; ++j) {
        const double sx = (j + 0.5) / factor - 0.5;
        const int y0 = static_cast<int>(std::floor(sy));
        const int x0 = static_cast<int>(std::floor(sx));
        double acc = 0.0;
        for (int dy = 0; dy <= 1; ++dy)
          for (int dx = 0; dx <= 1; ++dx) {
            const double wy = dy == 0 ? 1.0 - (sy - y0) : sy - y0;
            const double wx = dx == 0 ? 1.0 - (sx - x0) : sx - x0;
            acc += wy * wx *
                   x(clampi(y0 + dy, 0, h - 1), clampi(x0 + dx, 0, w - 1));
          }
        out(i, j) = static_cast<float>(acc);
      }
    }
    return out;
  }
  if (method == "bicubic") {
    using baseline_detail::cubic_w;
    for (int i = 0; i < oh; ++i) {
      const double sy = (i + 0.5) / factor - 0.5;
      const int y0 = static_cast<int>(std::floor(sy));
      for (int j = 0; j < ow; ++j) {
        const double sx = (j + 0.5) / factor - 0.5;
        const int x0 = static_cast<int>(std::floor(sx));
        double acc = 0.0, wsum = 0.0;
        for (int dy = -1; dy <= 2; ++dy)
          for (int dx = -1; dx <= 2; ++dx) {
            const double wgt = cubic_w(sy - (y0 + dy)) * cubic_w(sx - (x0 + dx));
            acc += wgt * x(clampi(y0 + dy, 0, h - 1), clampi(x0 + dx, 0, w - 1));
            wsum += wgt;
          }
        out(i, j) = static_cast<float>(acc / wsum);
      }
    }
    return out;
  }
  throw ConfigError("unknown interpolation method: " + method);
}

inline GeneGrid baseline_interpolate(const GeneGrid& sparse, int factor,
                                     const std::string& method) {
  GeneGrid out;
  out.gene = sparse.gene;
  out.values = interpolate_grid(sparse.values, factor, method);
  Tensor<float> tz({sparse.height(), sparse.width()});
  for (std::int64_t i = 0; i < sparse.tissue.numel(); ++i)
    tz.data[i] = sparse.tissue.data[i] != 0 ? 1.0f : 0.0f;
  const Tensor<float> tu = interpolate_grid(tz, factor, "nearest");
  out.tissue = Tensor<std::uint8_t>({tu.dim(0), tu.dim(1)});
  for (std::int64_t i = 0; i < tu.numel(); ++i) {
    out.tissue.data[i] = tu.data[i] > 0.5f ? 1 : 0;
    if (out.tissue.data[i] == 0) out.values.data[i] = 0.0f;
  }
  return out;
}

// Procedural grayscale textures (blob fields, gratings, smooth ramps with
// blotches) standing in for a natural-image directory when none is given.
inline ImageCorpus make_procedural_corpus(int count, int side,
                                          std::uint64_t seed) {
  if (count < 1 || side < 8) throw ConfigError("corpus spec too small");
  ImageCorpus corpus;
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, 0x6e1a9, static_cast<std::uint64_t>(i)));
    Tensor<float> img({side, side});
    const int kind = i % 3;
    if (kind == 0) {
      // blob field
      const int nb = 6 + static_cast<int>(rng.uniform_int(10));
      std::vector<double> cy(nb), cx(nb), sg(nb), am(nb);
      for (int b = 0; b < nb; ++b) {
        cy[b] = rng.uniform(0.0, side - 1.0);
        cx[b] = rng.uniform(0.0, side - 1.0);
        sg[b] = rng.uniform(side / 40.0 + 1.0, side / 8.0);
        am[b] = rng.uniform(0.2, 1.0);
      }
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          double v = 0.0;
          for (int b = 0; b < nb; ++b) {
            const double d2 = (y - cy[b]) * (y - cy[b]) + (x - cx[b]) * (x - cx[b]);
            v += am[b] * std::exp(-d2 / (2.0 * sg[b] * sg[b]));
          }
          img(y, x) = static_cast<float>(v);
        }
    } else if (kind == 1) {
      // oriented grating with a smooth envelope
      const double fy = rng.uniform(0.02, 0.25), fx = rng.uniform(0.02, 0.25);
      const double ph = rng.uniform(0.0, 6.28318);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
          const double env =
              std::exp(-((y - side / 2.0) * (y - side / 2.0) +
                         (x - side / 2.0) * (x - side / 2.0)) /
                       (2.0 * (side / 2.5) * (side / 2.5)));
          img(y, x) = static_cast<float>(
              0.5 + 0.5 * env * std::sin(fy * y * 6.28318 + fx * x * 6.28318 + ph));
        }
    } else {
      // smooth ramp plus soft random blotches
      const double gy = rng.uniform(-1.0, 1.0), gx = rng.uniform(-1.0, 1.0);
      for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
          img(y, x) = static_cast<float>(
              0.5 + 0.25 * (gy * (y - side / 2.0) + gx * (x - side / 2.0)) / side);
      const int nb = 4 + static_cast<int>(rng.uniform_int(6));
      for (int b = 0; b < nb; ++b) {
        const double cy = rng.uniform(0.0, side - 1.0);
        const double cx = rng.uniform(0.0, side - 1.0);
        const double sg = rng.uniform(side / 30.0 + 1.0, side / 6.0);
        const double am = rng.uniform(-0.4, 0.4);
        for (int y = 0; y < side; ++y)
          for (int x = 0; x < side; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            img(y, x) += static_cast<float>(am * std::exp(-d2 / (2.0 * sg * sg)));
          }
      }
    }
    // normalize to [0,1]
    float lo = img.data[0], hi = img.data[0];
    for (float v : img.data) { lo = std::min(lo, v); hi = std::max(hi, v); }
    const float range = hi - lo;
    for (auto& v : img.data) v = range > 0 ? (v - lo) / range : 0.5f;
    corpus.images.push_back(std::move(img));
    corpus.sources.push_back("procedural:" + std::to_string(i));
  }
  return corpus;
}

}  // namespace s2s
