#pragma once
// Reverse-mode autodiff on a dynamic tape. Nodes own their value tensors;
// gradient buffers are allocated during backward only where needed. The op
// set is exactly what the imputation network requires; the convolution
// kernels carry essentially all of the training cost and are written so the
// inner loops stay contiguous and vectorizable without -ffast-math.
//
// Determinism: every reduction accumulates in a fixed order (8 interleaved
// partial sums, combined left to right), so results do not depend on
// compiler autovectorization decisions or worker scheduling.

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/sampling.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

namespace detail {

// Fixed-order dot product: 8 interleaved accumulators then a left-to-right
// combine. Same numeric result at any SIMD width.
template <typename T>
inline T dot8(const T* a, const T* b, std::int64_t n) {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// single-precision tapes use the float math library routines
inline float exp_t(float x) { return ::expf(x); }
inline double exp_t(double x) { return std::exp(x); }
inline float erf_t(float x) { return ::erff(x); }
inline double erf_t(double x) { return std::erf(x); }

template <typename T>
inline T sum8(const T* a, std::int64_t n) {
  T acc[8] = {T(0), T(0), T(0), T(0), T(0), T(0), T(0), T(0)};
  std::int64_t i = 0;
  for (; i + 8 <= n; i += 8)
    for (int j = 0; j < 8; ++j) acc[j] += a[i + j];
  T tail = T(0);
  for (; i < n; ++i) tail += a[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

}  // namespace detail

using IndexMap = std::shared_ptr<std::vector<int>>;

template <typename T>
class Tape {
 public:
  using Id = int;

  struct Node {
    Tensor<T> val;
    Tensor<T> grad;
    bool needs_grad = false;
    std::function<void()> back;
  };

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  const Tensor<T>& val(Id id) const { return nodes_[id].val; }
  const Tensor<T>& grad(Id id) const { return nodes_[id].grad; }

  Id leaf(Tensor<T> v, bool needs_grad = false) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = needs_grad && grad_enabled_;
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  // ---- elementwise ----

  Id relu(Id x) {
    Tensor<T> out = nodes_[x].val;
    for (auto& v : out.data) v = v > T(0) ? v : T(0);
    return unary(x, std::move(out), [this](Id x, Id o) {
      const auto& xv = nodes_[x].val;
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::int64_t i = 0; i < xv.numel(); ++i)
        if (xv.data[i] > T(0)) gx.data[i] += g.data[i];
    });
  }

  Id gelu(Id x) {
    Tensor<T> out = nodes_[x].val;
    const T inv_sqrt2 = static_cast<T>(0.7071067811865476);
    for (auto& v : out.data)
      v = T(0.5) * v * (T(1) + detail::erf_t(v * inv_sqrt2));
    return unary(x, std::move(out), [this, inv_sqrt2](Id x, Id o) {
      const auto& xv = nodes_[x].val;
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      const T inv_sqrt2pi = static_cast<T>(0.3989422804014327);
      for (std::int64_t i = 0; i < xv.numel(); ++i) {
        const T z = xv.data[i];
        const T cdf = T(0.5) * (T(1) + detail::erf_t(z * inv_sqrt2));
        const T pdf = inv_sqrt2pi * detail::exp_t(T(-0.5) * z * z);
        gx.data[i] += g.data[i] * (cdf + z * pdf);
      }
    });
  }

  Id sigmoid(Id x) {
    Tensor<T> out = nodes_[x].val;
    for (auto& v : out.data) v = T(1) / (T(1) + detail::exp_t(-v));
    return unary(x, std::move(out), [this](Id x, Id o) {
      const auto& ov = nodes_[o].val;
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::int64_t i = 0; i < ov.numel(); ++i)
        gx.data[i] += g.data[i] * ov.data[i] * (T(1) - ov.data[i]);
    });
  }

  Id abs_op(Id x) {
    Tensor<T> out = nodes_[x].val;
    for (auto& v : out.data) v = v < T(0) ? -v : v;
    return unary(x, std::move(out), [this](Id x, Id o) {
      const auto& xv = nodes_[x].val;
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::int64_t i = 0; i < xv.numel(); ++i) {
        if (xv.data[i] > T(0)) gx.data[i] += g.data[i];
        else if (xv.data[i] < T(0)) gx.data[i] -= g.data[i];
      }
    });
  }

  Id add(Id a, Id b) { return add_scaled(a, b, T(1)); }
  Id sub(Id a, Id b) { return add_scaled(a, b, T(-1)); }

  Id add_scaled(Id a, Id b, T alpha) {
    if (!(nodes_[a].val.shape == nodes_[b].val.shape))
      throw ShapeError("add: operand shapes differ");
    Tensor<T> out = nodes_[a].val;
    const auto& bv = nodes_[b].val;
    for (std::int64_t i = 0; i < out.numel(); ++i)
      out.data[i] += alpha * bv.data[i];
    Node n;
    n.val = std::move(out);
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, a, b, o, alpha]() {
        const auto& g = nodes_[o].grad;
        if (nodes_[a].needs_grad) {
          auto& ga = nodes_[a].grad;
          for (std::int64_t i = 0; i < g.numel(); ++i) ga.data[i] += g.data[i];
        }
        if (nodes_[b].needs_grad) {
          auto& gb = nodes_[b].grad;
          for (std::int64_t i = 0; i < g.numel(); ++i)
            gb.data[i] += alpha * g.data[i];
        }
      };
    return o;
  }

  Id mul(Id a, Id b) {
    if (!(nodes_[a].val.shape == nodes_[b].val.shape))
      throw ShapeError("mul: operand shapes differ");
    Tensor<T> out = nodes_[a].val;
    const auto& bv = nodes_[b].val;
    for (std::int64_t i = 0; i < out.numel(); ++i) out.data[i] *= bv.data[i];
    Node n;
    n.val = std::move(out);
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, a, b, o]() {
        const auto& g = nodes_[o].grad;
        const auto& av = nodes_[a].val;
        const auto& bv2 = nodes_[b].val;
        if (nodes_[a].needs_grad) {
          auto& ga = nodes_[a].grad;
          for (std::int64_t i = 0; i < g.numel(); ++i)
            ga.data[i] += g.data[i] * bv2.data[i];
        }
        if (nodes_[b].needs_grad) {
          auto& gb = nodes_[b].grad;
          for (std::int64_t i = 0; i < g.numel(); ++i)
            gb.data[i] += g.data[i] * av.data[i];
        }
      };
    return o;
  }

  Id scale(Id x, T c) {
    Tensor<T> out = nodes_[x].val;
    for (auto& v : out.data) v *= c;
    return unary(x, std::move(out), [this, c](Id x, Id o) {
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::int64_t i = 0; i < g.numel(); ++i)
        gx.data[i] += c * g.data[i];
    });
  }

  // ---- convolution ----

  // x [C,H,W], w [O,C,k,k] (k odd), same-size output with symmetric
  // (edge-replicate) padding of k/2, optional bias [O]. Padding by explicit
  // buffer keeps every inner loop contiguous.
  Id conv2d(Id x, Id w, Id b = -1) {
    const auto& xv = nodes_[x].val;
    const auto& wv = nodes_[w].val;
    if (xv.rank() != 3 || wv.rank() != 4)
      throw ShapeError("conv2d: expected x[C,H,W], w[O,C,k,k]");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int O = wv.dim(0), k = wv.dim(2);
    if (wv.dim(1) != C || wv.dim(3) != k || k % 2 == 0)
      throw ShapeError("conv2d: weight shape mismatch");
    if (b >= 0 && (nodes_[b].val.rank() != 1 || nodes_[b].val.dim(0) != O))
      throw ShapeError("conv2d: bias shape mismatch");
    const int p = k / 2;
    const int Hp = H + 2 * p, Wp = W + 2 * p;
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    const std::int64_t pplane = static_cast<std::int64_t>(Hp) * Wp;

    auto padded = std::make_shared<Tensor<T>>();
    if (p == 0) {
      padded->shape = xv.shape;
      padded->data = xv.data;  // 1x1 kernels need no halo
    } else {
      *padded = Tensor<T>(std::vector<int>{C, Hp, Wp});
      for (int ci = 0; ci < C; ++ci)
        for (int py = 0; py < Hp; ++py) {
          const int sy = std::min(std::max(py - p, 0), H - 1);
          const T* src = xv.data.data() + ci * plane +
                         static_cast<std::int64_t>(sy) * W;
          T* dst = padded->data.data() + ci * pplane +
                   static_cast<std::int64_t>(py) * Wp;
          for (int px = 0; px < Wp; ++px)
            dst[px] = src[std::min(std::max(px - p, 0), W - 1)];
        }
    }

    Tensor<T> out({O, H, W});
    for (int co = 0; co < O; ++co) {
      T* op = out.data.data() + co * plane;
      if (b >= 0) {
        const T bias = nodes_[b].val.data[co];
        for (std::int64_t i = 0; i < plane; ++i) op[i] = bias;
      }
      for (int ci = 0; ci < C; ++ci) {
        const T* ip = padded->data.data() + ci * pplane;
        const T* wp = wv.data.data() +
                      (static_cast<std::int64_t>(co) * C + ci) * k * k;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const T wgt = wp[ky * k + kx];
            for (int y = 0; y < H; ++y) {
              const T* irow = ip + static_cast<std::int64_t>(y + ky) * Wp + kx;
              T* orow = op + static_cast<std::int64_t>(y) * W;
              for (int xx = 0; xx < W; ++xx) orow[xx] += wgt * irow[xx];
            }
          }
      }
    }

    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && (nodes_[x].needs_grad ||
                                     nodes_[w].needs_grad ||
                                     (b >= 0 && nodes_[b].needs_grad));
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, x, w, b, o, C, H, W, O, k, p, Hp, Wp, plane,
                        pplane, padded]() {
        const auto& g = nodes_[o].grad;
        const auto& wv = nodes_[w].val;
        if (nodes_[x].needs_grad) {
          auto& gx = nodes_[x].grad;
          if (p == 0) {
            for (int co = 0; co < O; ++co) {
              const T* gp = g.data.data() + co * plane;
              for (int ci = 0; ci < C; ++ci) {
                T* gxp = gx.data.data() + ci * plane;
                const T wgt =
                    wv.data[(static_cast<std::int64_t>(co) * C + ci)];
                for (std::int64_t i = 0; i < plane; ++i)
                  gxp[i] += wgt * gp[i];
              }
            }
          } else {
            // accumulate into the padded layout, then fold replicated edges
            Tensor<T> gpad({C, Hp, Wp});
            for (int co = 0; co < O; ++co) {
              const T* gp = g.data.data() + co * plane;
              for (int ci = 0; ci < C; ++ci) {
                T* gpp = gpad.data.data() + ci * pplane;
                const T* wp = wv.data.data() +
                              (static_cast<std::int64_t>(co) * C + ci) * k * k;
                for (int ky = 0; ky < k; ++ky)
                  for (int kx = 0; kx < k; ++kx) {
                    const T wgt = wp[ky * k + kx];
                    for (int y = 0; y < H; ++y) {
                      T* prow =
                          gpp + static_cast<std::int64_t>(y + ky) * Wp + kx;
                      const T* grow = gp + static_cast<std::int64_t>(y) * W;
                      for (int xx = 0; xx < W; ++xx)
                        prow[xx] += wgt * grow[xx];
                    }
                  }
              }
            }
            for (int ci = 0; ci < C; ++ci)
              for (int py = 0; py < Hp; ++py) {
                const int sy = std::min(std::max(py - p, 0), H - 1);
                const T* src = gpad.data.data() + ci * pplane +
                               static_cast<std::int64_t>(py) * Wp;
                T* dst = gx.data.data() + ci * plane +
                         static_cast<std::int64_t>(sy) * W;
                for (int px = 0; px < Wp; ++px)
                  dst[std::min(std::max(px - p, 0), W - 1)] += src[px];
              }
          }
        }
        if (nodes_[w].needs_grad) {
          auto& gw = nodes_[w].grad;
          for (int co = 0; co < O; ++co) {
            const T* gp = g.data.data() + co * plane;
            for (int ci = 0; ci < C; ++ci) {
              const T* ip = padded->data.data() + ci * pplane;
              T* gwp = gw.data.data() +
                       (static_cast<std::int64_t>(co) * C + ci) * k * k;
              for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                  T acc = T(0);
                  for (int y = 0; y < H; ++y)
                    acc += detail::dot8(
                        ip + static_cast<std::int64_t>(y + ky) * Wp + kx,
                        gp + static_cast<std::int64_t>(y) * W, W);
                  gwp[ky * k + kx] += acc;
                }
            }
          }
        }
        if (b >= 0 && nodes_[b].needs_grad) {
          auto& gb = nodes_[b].grad;
          for (int co = 0; co < O; ++co)
            gb.data[co] += detail::sum8(g.data.data() + co * plane, plane);
        }
      };
    return o;
  }

  // ---- linear algebra ----

  // x [N,K] * w [K,M] + b[M]
  Id linear(Id x, Id w, Id b = -1) {
    const auto& xv = nodes_[x].val;
    const auto& wv = nodes_[w].val;
    if (xv.rank() != 2 || wv.rank() != 2 || xv.dim(1) != wv.dim(0))
      throw ShapeError("linear: shape mismatch");
    const int N = xv.dim(0), K = xv.dim(1), M = wv.dim(1);
    if (b >= 0 && (nodes_[b].val.rank() != 1 || nodes_[b].val.dim(0) != M))
      throw ShapeError("linear: bias shape mismatch");
    Tensor<T> out({N, M});
    for (int i = 0; i < N; ++i) {
      T* orow = out.data.data() + static_cast<std::int64_t>(i) * M;
      if (b >= 0)
        for (int j = 0; j < M; ++j) orow[j] = nodes_[b].val.data[j];
      const T* xrow = xv.data.data() + static_cast<std::int64_t>(i) * K;
      for (int kk = 0; kk < K; ++kk) {
        const T xi = xrow[kk];
        const T* wrow = wv.data.data() + static_cast<std::int64_t>(kk) * M;
        for (int j = 0; j < M; ++j) orow[j] += xi * wrow[j];
      }
    }
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && (nodes_[x].needs_grad ||
                                     nodes_[w].needs_grad ||
                                     (b >= 0 && nodes_[b].needs_grad));
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, x, w, b, o, N, K, M]() {
        const auto& g = nodes_[o].grad;
        const auto& xv = nodes_[x].val;
        const auto& wv = nodes_[w].val;
        if (nodes_[x].needs_grad) {
          auto& gx = nodes_[x].grad;
          for (int i = 0; i < N; ++i) {
            const T* grow = g.data.data() + static_cast<std::int64_t>(i) * M;
            T* gxrow = gx.data.data() + static_cast<std::int64_t>(i) * K;
            for (int kk = 0; kk < K; ++kk)
              gxrow[kk] += detail::dot8(
                  wv.data.data() + static_cast<std::int64_t>(kk) * M, grow, M);
          }
        }
        if (nodes_[w].needs_grad) {
          auto& gw = nodes_[w].grad;
          for (int i = 0; i < N; ++i) {
            const T* xrow = xv.data.data() + static_cast<std::int64_t>(i) * K;
            const T* grow = g.data.data() + static_cast<std::int64_t>(i) * M;
            for (int kk = 0; kk < K; ++kk) {
              const T xi = xrow[kk];
              T* gwrow = gw.data.data() + static_cast<std::int64_t>(kk) * M;
              for (int j = 0; j < M; ++j) gwrow[j] += xi * grow[j];
            }
          }
        }
        if (b >= 0 && nodes_[b].needs_grad) {
          auto& gb = nodes_[b].grad;
          for (int i = 0; i < N; ++i) {
            const T* grow = g.data.data() + static_cast<std::int64_t>(i) * M;
            for (int j = 0; j < M; ++j) gb.data[j] += grow[j];
          }
        }
      };
    return o;
  }

  // scores = A [B,M,K] x B [B,N,K]^T -> [B,M,N]
  Id bmm_nt(Id a, Id b) {
    const auto& av = nodes_[a].val;
    const auto& bv = nodes_[b].val;
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) ||
        av.dim(2) != bv.dim(2))
      throw ShapeError("bmm_nt: shape mismatch");
    const int B = av.dim(0), M = av.dim(1), K = av.dim(2), N = bv.dim(1);
    Tensor<T> out({B, M, N});
    for (int bb = 0; bb < B; ++bb)
      for (int i = 0; i < M; ++i) {
        const T* arow = &av(bb, i, 0);
        for (int j = 0; j < N; ++j)
          out(bb, i, j) = detail::dot8(arow, &bv(bb, j, 0), K);
      }
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && (nodes_[a].needs_grad ||
                                     nodes_[b].needs_grad);
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, a, b, o, B, M, K, N]() {
        const auto& g = nodes_[o].grad;
        const auto& av = nodes_[a].val;
        const auto& bv = nodes_[b].val;
        if (nodes_[a].needs_grad) {
          auto& ga = nodes_[a].grad;  // ga[b,i,:] += sum_j g[b,i,j] * bv[b,j,:]
          for (int bb = 0; bb < B; ++bb)
            for (int i = 0; i < M; ++i) {
              T* garow = &ga(bb, i, 0);
              for (int j = 0; j < N; ++j) {
                const T gij = g(bb, i, j);
                const T* brow = &bv(bb, j, 0);
                for (int kk = 0; kk < K; ++kk) garow[kk] += gij * brow[kk];
              }
            }
        }
        if (nodes_[b].needs_grad) {
          auto& gb = nodes_[b].grad;  // gb[b,j,:] += sum_i g[b,i,j] * av[b,i,:]
          for (int bb = 0; bb < B; ++bb)
            for (int i = 0; i < M; ++i) {
              const T* arow = &av(bb, i, 0);
              for (int j = 0; j < N; ++j) {
                const T gij = g(bb, i, j);
                T* gbrow = &gb(bb, j, 0);
                for (int kk = 0; kk < K; ++kk) gbrow[kk] += gij * arow[kk];
              }
            }
        }
      };
    return o;
  }

  // out = A [B,M,N] x B [B,N,K] -> [B,M,K]
  Id bmm(Id a, Id b) {
    const auto& av = nodes_[a].val;
    const auto& bv = nodes_[b].val;
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) ||
        av.dim(2) != bv.dim(1))
      throw ShapeError("bmm: shape mismatch");
    const int B = av.dim(0), M = av.dim(1), N = av.dim(2), K = bv.dim(2);
    Tensor<T> out({B, M, K});
    for (int bb = 0; bb < B; ++bb)
      for (int i = 0; i < M; ++i) {
        T* orow = &out(bb, i, 0);
        for (int j = 0; j < N; ++j) {
          const T aij = av(bb, i, j);
          const T* brow = &bv(bb, j, 0);
          for (int kk = 0; kk < K; ++kk) orow[kk] += aij * brow[kk];
        }
      }
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && (nodes_[a].needs_grad ||
                                     nodes_[b].needs_grad);
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, a, b, o, B, M, N, K]() {
        const auto& g = nodes_[o].grad;
        const auto& av = nodes_[a].val;
        const auto& bv = nodes_[b].val;
        if (nodes_[a].needs_grad) {
          auto& ga = nodes_[a].grad;  // ga[b,i,j] += dot(g[b,i,:], bv[b,j,:])
          for (int bb = 0; bb < B; ++bb)
            for (int i = 0; i < M; ++i) {
              const T* grow = &g(bb, i, 0);
              for (int j = 0; j < N; ++j)
                ga(bb, i, j) += detail::dot8(grow, &bv(bb, j, 0), K);
            }
        }
        if (nodes_[b].needs_grad) {
          auto& gb = nodes_[b].grad;  // gb[b,j,:] += sum_i av[b,i,j] * g[b,i,:]
          for (int bb = 0; bb < B; ++bb)
            for (int i = 0; i < M; ++i) {
              const T* grow = &g(bb, i, 0);
              for (int j = 0; j < N; ++j) {
                const T aij = av(bb, i, j);
                T* gbrow = &gb(bb, j, 0);
                for (int kk = 0; kk < K; ++kk) gbrow[kk] += aij * grow[kk];
              }
            }
        }
      };
    return o;
  }

  // ---- normalization / attention pieces ----

  // Layer norm across the channel axis of x [C,H,W], per spatial position.
  Id layer_norm_ch(Id x, Id gain, Id bias, T eps) {
    const auto& xv = nodes_[x].val;
    if (xv.rank() != 3) throw ShapeError("layer_norm_ch: expected [C,H,W]");
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    if (nodes_[gain].val.numel() != C || nodes_[bias].val.numel() != C)
      throw ShapeError("layer_norm_ch: gain/bias must have C entries");
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    Tensor<T> out({C, H, W});
    Tensor<T> inv_sd({H, W});
    Tensor<T> xhat({C, H, W});
    const auto& gv = nodes_[gain].val;
    const auto& bv = nodes_[bias].val;
    // plane sweeps keep all accesses contiguous; per-position channel
    // accumulation order is unchanged
    std::vector<T> mean(static_cast<std::size_t>(plane), T(0));
    for (int c = 0; c < C; ++c) {
      const T* row = xv.data.data() + c * plane;
      for (std::int64_t p = 0; p < plane; ++p) mean[p] += row[p];
    }
    for (std::int64_t p = 0; p < plane; ++p) mean[p] /= T(C);
    std::vector<T> var(static_cast<std::size_t>(plane), T(0));
    for (int c = 0; c < C; ++c) {
      const T* row = xv.data.data() + c * plane;
      for (std::int64_t p = 0; p < plane; ++p) {
        const T d = row[p] - mean[p];
        var[p] += d * d;
      }
    }
    for (std::int64_t p = 0; p < plane; ++p)
      inv_sd.data[p] = T(1) / std::sqrt(var[p] / T(C) + eps);
    for (int c = 0; c < C; ++c) {
      const T* row = xv.data.data() + c * plane;
      T* xh = xhat.data.data() + c * plane;
      T* op = out.data.data() + c * plane;
      const T gc = gv.data[c], bc = bv.data[c];
      for (std::int64_t p = 0; p < plane; ++p) {
        xh[p] = (row[p] - mean[p]) * inv_sd.data[p];
        op[p] = xh[p] * gc + bc;
      }
    }
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && (nodes_[x].needs_grad ||
                                     nodes_[gain].needs_grad ||
                                     nodes_[bias].needs_grad);
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad) {
      auto isd_keep = std::make_shared<Tensor<T>>(std::move(inv_sd));
      auto xhat_keep = std::make_shared<Tensor<T>>(std::move(xhat));
      nodes_[o].back = [this, x, gain, bias, o, C, plane, isd_keep,
                        xhat_keep]() {
        const auto& g = nodes_[o].grad;
        const auto& gv = nodes_[gain].val;
        if (nodes_[gain].needs_grad) {
          auto& gg = nodes_[gain].grad;
          for (int c = 0; c < C; ++c)
            gg.data[c] += detail::dot8(g.data.data() + c * plane,
                                       xhat_keep->data.data() + c * plane,
                                       plane);
        }
        if (nodes_[bias].needs_grad) {
          auto& gb = nodes_[bias].grad;
          for (int c = 0; c < C; ++c)
            gb.data[c] += detail::sum8(g.data.data() + c * plane, plane);
        }
        if (nodes_[x].needs_grad) {
          auto& gx = nodes_[x].grad;
          std::vector<T> m1(static_cast<std::size_t>(plane), T(0));
          std::vector<T> m2(static_cast<std::size_t>(plane), T(0));
          for (int c = 0; c < C; ++c) {
            const T* grow = g.data.data() + c * plane;
            const T* xh = xhat_keep->data.data() + c * plane;
            const T gc = gv.data[c];
            for (std::int64_t p = 0; p < plane; ++p) {
              const T dy = grow[p] * gc;
              m1[p] += dy;
              m2[p] += dy * xh[p];
            }
          }
          for (std::int64_t p = 0; p < plane; ++p) {
            m1[p] /= T(C);
            m2[p] /= T(C);
          }
          for (int c = 0; c < C; ++c) {
            const T* grow = g.data.data() + c * plane;
            const T* xh = xhat_keep->data.data() + c * plane;
            T* gxp = gx.data.data() + c * plane;
            const T gc = gv.data[c];
            for (std::int64_t p = 0; p < plane; ++p)
              gxp[p] += isd_keep->data[p] *
                        (grow[p] * gc - m1[p] - xh[p] * m2[p]);
          }
        }
      };
    }
    return o;
  }

  // Softmax over the last axis.
  Id softmax_last(Id x) {
    const auto& xv = nodes_[x].val;
    if (xv.rank() < 1) throw ShapeError("softmax_last: rank must be >= 1");
    const int n = xv.dim(xv.rank() - 1);
    const std::int64_t rows = xv.numel() / n;
    Tensor<T> out = xv;
    for (std::int64_t r = 0; r < rows; ++r) {
      T* row = out.data.data() + r * n;
      T mx = row[0];
      for (int i = 1; i < n; ++i) mx = std::max(mx, row[i]);
      T sum = T(0);
      for (int i = 0; i < n; ++i) {
        row[i] = detail::exp_t(row[i] - mx);
        sum += row[i];
      }
      const T inv = T(1) / sum;
      for (int i = 0; i < n; ++i) row[i] *= inv;
    }
    return unary(x, std::move(out), [this, n, rows](Id x, Id o) {
      const auto& s = nodes_[o].val;
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::int64_t r = 0; r < rows; ++r) {
        const T* srow = s.data.data() + r * n;
        const T* grow = g.data.data() + r * n;
        T dot = T(0);
        for (int i = 0; i < n; ++i) dot += srow[i] * grow[i];
        T* gxrow = gx.data.data() + r * n;
        for (int i = 0; i < n; ++i)
          gxrow[i] += srow[i] * (grow[i] - dot);
      }
    });
  }

  // out.data[i] = x.data[idx[i]]; covers window partition/merge, cyclic
  // shifts, head split/merge, transposes, and mask-lattice gathers.
  Id gather(Id x, IndexMap idx, std::vector<int> out_shape) {
    const auto& xv = nodes_[x].val;
    Tensor<T> out(std::move(out_shape));
    if (static_cast<std::int64_t>(idx->size()) != out.numel())
      throw ShapeError("gather: index map size does not match output");
    for (std::size_t i = 0; i < idx->size(); ++i)
      out.data[i] = xv.data[(*idx)[i]];
    return unary(x, std::move(out), [this, idx](Id x, Id o) {
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::size_t i = 0; i < idx->size(); ++i)
        gx.data[(*idx)[i]] += g.data[i];
    });
  }

  // scores [B,n,n] += bias [G,n,n], broadcast over b with group = b % G.
  Id add_group_bias(Id scores, Id bias) {
    const auto& sv = nodes_[scores].val;
    const auto& bv = nodes_[bias].val;
    if (sv.rank() != 3 || bv.rank() != 3 || sv.dim(1) != bv.dim(1) ||
        sv.dim(2) != bv.dim(2) || sv.dim(0) % bv.dim(0) != 0)
      throw ShapeError("add_group_bias: shape mismatch");
    const int B = sv.dim(0), G = bv.dim(0);
    const std::int64_t m = static_cast<std::int64_t>(sv.dim(1)) * sv.dim(2);
    Tensor<T> out = sv;
    for (int b = 0; b < B; ++b) {
      const T* brow = bv.data.data() + (b % G) * m;
      T* orow = out.data.data() + b * m;
      for (std::int64_t i = 0; i < m; ++i) orow[i] += brow[i];
    }
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && (nodes_[scores].needs_grad ||
                                     nodes_[bias].needs_grad);
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, scores, bias, o, B, G, m]() {
        const auto& g = nodes_[o].grad;
        if (nodes_[scores].needs_grad) {
          auto& gs = nodes_[scores].grad;
          for (std::int64_t i = 0; i < g.numel(); ++i)
            gs.data[i] += g.data[i];
        }
        if (nodes_[bias].needs_grad) {
          auto& gb = nodes_[bias].grad;
          for (int b = 0; b < B; ++b) {
            T* gbrow = gb.data.data() + (b % G) * m;
            const T* grow = g.data.data() + b * m;
            for (std::int64_t i = 0; i < m; ++i) gbrow[i] += grow[i];
          }
        }
      };
    return o;
  }

  // scores [B,n,n] += mask [nW,n,n] (constant), broadcast with win = b / (B/nW).
  Id add_window_mask(Id scores, const Tensor<T>& mask) {
    const auto& sv = nodes_[scores].val;
    if (sv.rank() != 3 || mask.rank() != 3 || sv.dim(1) != mask.dim(1) ||
        sv.dim(2) != mask.dim(2) || sv.dim(0) % mask.dim(0) != 0)
      throw ShapeError("add_window_mask: shape mismatch");
    const int B = sv.dim(0), nW = mask.dim(0);
    const int per = B / nW;
    const std::int64_t m = static_cast<std::int64_t>(sv.dim(1)) * sv.dim(2);
    Tensor<T> out = sv;
    for (int b = 0; b < B; ++b) {
      const T* mrow = mask.data.data() + (b / per) * m;
      T* orow = out.data.data() + b * m;
      for (std::int64_t i = 0; i < m; ++i) orow[i] += mrow[i];
    }
    return unary(scores, std::move(out), [this](Id x, Id o) {
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::int64_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
    });
  }

  // [C,H,W] -> [1,C] channel means (row vector, ready for linear()).
  Id global_avg_pool(Id x) {
    const auto& xv = nodes_[x].val;
    if (xv.rank() != 3) throw ShapeError("global_avg_pool: expected [C,H,W]");
    const int C = xv.dim(0);
    const std::int64_t plane =
        static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    Tensor<T> out({1, C});
    for (int c = 0; c < C; ++c)
      out.data[c] =
          detail::sum8(xv.data.data() + c * plane, plane) / T(plane);
    return unary(x, std::move(out), [this, C, plane](Id x, Id o) {
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (int c = 0; c < C; ++c) {
        const T gc = g.data[c] / T(plane);
        T* row = gx.data.data() + c * plane;
        for (std::int64_t i = 0; i < plane; ++i) row[i] += gc;
      }
    });
  }

  // x [C,H,W] * s [C] broadcast over the plane.
  Id channel_scale(Id x, Id s) {
    const auto& xv = nodes_[x].val;
    const auto& sv = nodes_[s].val;
    if (xv.rank() != 3 || sv.numel() != xv.dim(0))
      throw ShapeError("channel_scale: shape mismatch");
    const int C = xv.dim(0);
    const std::int64_t plane =
        static_cast<std::int64_t>(xv.dim(1)) * xv.dim(2);
    Tensor<T> out = xv;
    for (int c = 0; c < C; ++c) {
      const T sc = sv.data[c];
      T* row = out.data.data() + c * plane;
      for (std::int64_t i = 0; i < plane; ++i) row[i] *= sc;
    }
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && (nodes_[x].needs_grad ||
                                     nodes_[s].needs_grad);
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, x, s, o, C, plane]() {
        const auto& g = nodes_[o].grad;
        const auto& xv = nodes_[x].val;
        const auto& sv = nodes_[s].val;
        if (nodes_[x].needs_grad) {
          auto& gx = nodes_[x].grad;
          for (int c = 0; c < C; ++c) {
            const T sc = sv.data[c];
            const T* grow = g.data.data() + c * plane;
            T* gxrow = gx.data.data() + c * plane;
            for (std::int64_t i = 0; i < plane; ++i)
              gxrow[i] += sc * grow[i];
          }
        }
        if (nodes_[s].needs_grad) {
          auto& gs = nodes_[s].grad;
          for (int c = 0; c < C; ++c)
            gs.data[c] += detail::dot8(g.data.data() + c * plane,
                                       xv.data.data() + c * plane, plane);
        }
      };
    return o;
  }

  Id concat_ch(const std::vector<Id>& parts) {
    if (parts.empty()) throw ShapeError("concat_ch: no inputs");
    const int H = nodes_[parts[0]].val.dim(1);
    const int W = nodes_[parts[0]].val.dim(2);
    int Ctot = 0;
    bool ng = false;
    for (Id p : parts) {
      const auto& v = nodes_[p].val;
      if (v.rank() != 3 || v.dim(1) != H || v.dim(2) != W)
        throw ShapeError("concat_ch: plane shapes differ");
      Ctot += v.dim(0);
      ng = ng || nodes_[p].needs_grad;
    }
    Tensor<T> out({Ctot, H, W});
    const std::int64_t plane = static_cast<std::int64_t>(H) * W;
    std::int64_t off = 0;
    for (Id p : parts) {
      const auto& v = nodes_[p].val;
      std::copy(v.data.begin(), v.data.end(), out.data.begin() + off);
      off += v.numel();
    }
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && ng;
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad) {
      auto parts_keep = std::make_shared<std::vector<Id>>(parts);
      nodes_[o].back = [this, parts_keep, o, plane]() {
        const auto& g = nodes_[o].grad;
        std::int64_t off = 0;
        for (Id p : *parts_keep) {
          const std::int64_t n = nodes_[p].val.numel();
          if (nodes_[p].needs_grad) {
            auto& gp = nodes_[p].grad;
            for (std::int64_t i = 0; i < n; ++i)
              gp.data[i] += g.data[off + i];
          }
          off += n;
        }
        (void)plane;
      };
    }
    return o;
  }

  // Data consistency overwrite: keep the estimate off-lattice, substitute the
  // observation on-lattice. Select-based so sampled positions are bit-exact.
  // est is [1,H,W] or [H,W]; obs is the compacted observation grid.
  Id dc_overwrite(Id est, const Tensor<T>& obs, const SamplingMask& m) {
    const auto& ev = nodes_[est].val;
    const bool chan = ev.rank() == 3;
    const int H = chan ? ev.dim(1) : ev.dim(0);
    const int W = chan ? ev.dim(2) : ev.dim(1);
    if ((chan && ev.dim(0) != 1) || H != m.height || W != m.width)
      throw ShapeError("dc_overwrite: estimate/mask mismatch");
    if (obs.dim(0) != m.rows_out() || obs.dim(1) != m.cols_out())
      throw ShapeError("dc_overwrite: observation/mask mismatch");
    Tensor<T> out = ev;
    for (int r = 0; r < m.rows_out(); ++r)
      for (int c = 0; c < m.cols_out(); ++c)
        out.data[static_cast<std::int64_t>(m.off_row + r * m.stride) * W +
                 (m.off_col + c * m.stride)] = obs(r, c);
    return unary(est, std::move(out), [this, m, W](Id x, Id o) {
      const auto& g = nodes_[o].grad;
      auto& gx = nodes_[x].grad;
      for (std::int64_t i = 0; i < g.numel(); ++i) gx.data[i] += g.data[i];
      // re-zero the overwritten lattice contributions
      for (int r = 0; r < m.rows_out(); ++r)
        for (int c = 0; c < m.cols_out(); ++c) {
          const std::int64_t p =
              static_cast<std::int64_t>(m.off_row + r * m.stride) * W +
              (m.off_col + c * m.stride);
          gx.data[p] -= g.data[p];
        }
    });
  }

  // ---- reductions ----

  // Weighted mean to a scalar: sum(x * w) / denom; w == nullptr means w = 1.
  Id mean_weighted(Id x, std::shared_ptr<Tensor<T>> w, double denom) {
    const auto& xv = nodes_[x].val;
    if (w && !(w->shape == xv.shape))
      throw ShapeError("mean_weighted: weight shape mismatch");
    if (denom <= 0.0) throw EmptyRegion("mean_weighted: empty denominator");
    double acc = 0.0;
    if (w) {
      for (std::int64_t i = 0; i < xv.numel(); ++i)
        acc += static_cast<double>(xv.data[i]) *
               static_cast<double>(w->data[i]);
    } else {
      for (std::int64_t i = 0; i < xv.numel(); ++i)
        acc += static_cast<double>(xv.data[i]);
    }
    Tensor<T> out({1});
    out.data[0] = static_cast<T>(acc / denom);
    return unary(x, std::move(out), [this, w, denom](Id x, Id o) {
      const T g = nodes_[o].grad.data[0];
      auto& gx = nodes_[x].grad;
      const T inv = static_cast<T>(1.0 / denom);
      if (w) {
        for (std::int64_t i = 0; i < gx.numel(); ++i)
          gx.data[i] += g * inv * w->data[i];
      } else {
        for (std::int64_t i = 0; i < gx.numel(); ++i) gx.data[i] += g * inv;
      }
    });
  }

  // total = sum_i coeff_i * scalar_i
  Id weighted_sum(const std::vector<Id>& scalars,
                  const std::vector<double>& coeffs) {
    if (scalars.size() != coeffs.size() || scalars.empty())
      throw ShapeError("weighted_sum: size mismatch");
    double acc = 0.0;
    bool ng = false;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
      acc += coeffs[i] * static_cast<double>(nodes_[scalars[i]].val.data[0]);
      ng = ng || nodes_[scalars[i]].needs_grad;
    }
    Tensor<T> out({1});
    out.data[0] = static_cast<T>(acc);
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && ng;
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad) {
      auto ids = std::make_shared<std::vector<Id>>(scalars);
      auto cs = std::make_shared<std::vector<double>>(coeffs);
      nodes_[o].back = [this, ids, cs, o]() {
        const T g = nodes_[o].grad.data[0];
        for (std::size_t i = 0; i < ids->size(); ++i)
          if (nodes_[(*ids)[i]].needs_grad)
            nodes_[(*ids)[i]].grad.data[0] +=
                g * static_cast<T>((*cs)[i]);
      };
    }
    return o;
  }

  // ---- backward ----

  void backward(Id root, T seed = T(1)) {
    if (!grad_enabled_)
      throw ConfigError("backward called on a no-grad tape");
    if (nodes_[root].val.numel() != 1)
      throw ShapeError("backward: root must be scalar");
    for (auto& n : nodes_)
      if (n.needs_grad && n.grad.data.empty())
        n.grad = Tensor<T>(n.val.shape);
    if (!nodes_[root].needs_grad) return;
    nodes_[root].grad.data[0] += seed;
    for (Id i = static_cast<Id>(nodes_.size()) - 1; i >= 0; --i)
      if (nodes_[i].back && nodes_[i].needs_grad) nodes_[i].back();
  }

 private:
  Id push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
  }

  template <typename F>
  Id unary(Id x, Tensor<T> out, F&& back_fn) {
    Node n;
    n.val = std::move(out);
    n.needs_grad = grad_enabled_ && nodes_[x].needs_grad;
    const Id o = push(std::move(n));
    if (nodes_[o].needs_grad)
      nodes_[o].back = [this, x, o, fn = std::forward<F>(back_fn)]() {
        fn(x, o);
      };
    return o;
  }

  bool grad_enabled_ = true;
  std::vector<Node> nodes_;
};

}  // namespace s2s
