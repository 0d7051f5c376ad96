#pragma once
// The cascaded data-consistent imputation network. Each of the K stages
// applies a data-consistency overwrite followed by a residual dense hybrid
// attention network (RDHAN); stage outputs accumulate residually on top of
// the bilinear-upsampled input. Resolution-agnostic and single-channel:
// the same parameters run at any grid size whose sides the window divides.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/rng.hpp"
#include "s2s/sampling.hpp"
#include "s2s/tape.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

struct CdcinConfig {
  int num_cascades = 3;
  int num_rdhab = 8;
  int channels = 32;
  int rdb_growth = 32;
  int rdb_layers = 4;
  int window_size = 8;
  int num_heads = 4;
  double cab_alpha = 0.01;
  double mlp_ratio = 4.0;
  int cab_squeeze = 2;    // CAB conv bottleneck factor
  int ca_reduction = 16;  // channel-attention bottleneck reduction
  bool use_hab = true;
  bool use_dc = true;
  bool final_dc_at_inference = true;
  bool share_stage_weights = true;
  // The HAB equations end at Y = MLP(LN(X2)); the extra "+ X2" residual is
  // the conventional transformer form and the default here (toggleable).
  bool hab_extra_residual = true;

  int cab_mid() const { return channels / cab_squeeze; }
  int ca_mid() const { return std::max(1, channels / ca_reduction); }
  int mlp_hidden() const {
    return std::max(1, static_cast<int>(mlp_ratio * channels + 0.5));
  }
  int head_dim() const { return channels / num_heads; }
  int num_stage_param_sets() const {
    return share_stage_weights ? 1 : num_cascades;
  }

  void validate() const {
    if (num_cascades < 1) throw ConfigError("num_cascades must be >= 1");
    if (num_rdhab < 1) throw ConfigError("num_rdhab must be >= 1");
    if (channels < 1 || rdb_growth < 1 || rdb_layers < 1)
      throw ConfigError("channels, rdb_growth, rdb_layers must be >= 1");
    if (window_size < 1) throw ConfigError("window_size must be >= 1");
    if (num_heads < 1 || channels % num_heads != 0)
      throw ConfigError("channels must be divisible by num_heads");
    if (cab_squeeze < 1 || channels % cab_squeeze != 0)
      throw ConfigError("channels must be divisible by cab_squeeze");
    if (ca_reduction < 1) throw ConfigError("ca_reduction must be >= 1");
    if (cab_alpha < 0.0) throw ConfigError("cab_alpha must be >= 0");
    if (mlp_ratio <= 0.0) throw ConfigError("mlp_ratio must be > 0");
  }
};

template <typename T>
struct ParamStore {
  std::vector<std::string> names;
  std::vector<Tensor<T>> values;

  int add(const std::string& name, std::vector<int> shape) {
    names.push_back(name);
    values.emplace_back(std::move(shape));
    return static_cast<int>(values.size()) - 1;
  }
  int find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
  std::int64_t total_elements() const {
    std::int64_t n = 0;
    for (const auto& v : values) n += v.numel();
    return n;
  }
  std::size_t size() const { return values.size(); }
};

namespace net {

struct Conv {
  int w = -1, b = -1;
  int in_c = 0, out_c = 0, k = 3;
};
struct Linear {
  int w = -1, b = -1;
  int in_f = 0, out_f = 0;
};
struct Norm {
  int gain = -1, bias = -1;
};
struct Cab {
  Conv squeeze, expand;
  Linear ca_down, ca_up;
};
struct Hab {
  Norm ln1, ln2;
  Linear qkv, proj;
  int rel_bias = -1;  // [(2w-1)^2, heads]
  Cab cab;
  Linear mlp1, mlp2;
  bool shifted = false;
};
struct Rdb {
  std::vector<Conv> convs;
  Conv fusion;
};
struct Rdhab {
  Rdb rdb;
  Hab hab;
};
struct Rdhan {
  Conv shallow;
  std::vector<Rdhab> blocks;
  Conv fuse1, fuse3, recon;
};

}  // namespace net

template <typename T>
class CdcinModel {
 public:
  using Id = typename Tape<T>::Id;

  CdcinConfig cfg;
  ParamStore<T> params;
  std::vector<net::Rdhan> stages;

  static CdcinModel build(const CdcinConfig& cfg) {
    cfg.validate();
    CdcinModel m;
    m.cfg = cfg;
    for (int s = 0; s < cfg.num_stage_param_sets(); ++s)
      m.stages.push_back(m.build_rdhan("stage" + std::to_string(s) + "."));
    return m;
  }

  // Kaiming for convolutions, truncated normal (0.02) for attention/MLP
  // weights, zeros for the reconstruction conv so training starts at the
  // upsampled input.
  void init_params(Rng& rng) {
    for (auto& t : params.values)
      for (auto& v : t.data) v = T(0);
    for (const auto& st : stages) {
      init_conv(st.shallow, rng);
      for (const auto& blk : st.blocks) {
        for (const auto& cv : blk.rdb.convs) init_conv(cv, rng);
        init_conv(blk.rdb.fusion, rng);
        set_ones(blk.hab.ln1.gain);
        set_ones(blk.hab.ln2.gain);
        init_linear(blk.hab.qkv, rng);
        init_linear(blk.hab.proj, rng);
        init_trunc(blk.hab.rel_bias, rng);
        init_conv(blk.hab.cab.squeeze, rng);
        init_conv(blk.hab.cab.expand, rng);
        init_linear(blk.hab.cab.ca_down, rng);
        init_linear(blk.hab.cab.ca_up, rng);
        init_linear(blk.hab.mlp1, rng);
        init_linear(blk.hab.mlp2, rng);
      }
      init_conv(st.fuse1, rng);
      init_conv(st.fuse3, rng);
      // recon stays zero
    }
  }

  // All learnable weights zero, LN gains one: the cascade is the identity on
  // the upsampled input.
  void zero_params() {
    for (auto& t : params.values)
      for (auto& v : t.data) v = T(0);
    for (const auto& st : stages)
      for (const auto& blk : st.blocks) {
        set_ones(blk.hab.ln1.gain);
        set_ones(blk.hab.ln2.gain);
      }
  }

  struct Bound {
    std::vector<Id> ids;  // parallel to params.values
  };

  Bound bind(Tape<T>& tape, bool needs_grad) const {
    Bound b;
    b.ids.reserve(params.size());
    for (const auto& t : params.values) b.ids.push_back(tape.leaf(t, needs_grad));
    return b;
  }

  // Cascade forward. x_lr is the compacted low-resolution observation; mask
  // places it on the target lattice and fixes the upsampling factor.
  std::vector<Id> forward(Tape<T>& tape, const Bound& bound,
                          const Tensor<T>& x_lr,
                          const SamplingMask& mask) const {
    if (x_lr.rank() != 2) throw ShapeError("cdcin: input must be 2D");
    if (x_lr.dim(0) != mask.rows_out() || x_lr.dim(1) != mask.cols_out())
      throw ShapeError("cdcin: input does not match mask lattice " +
                       shape_str({mask.rows_out(), mask.cols_out()}));
    const int H = mask.height, W = mask.width;
    if (H % cfg.window_size != 0 || W % cfg.window_size != 0)
      throw ShapeError("cdcin: target sides must be divisible by window_size");

    Tensor<T> up = upsample_bilinear(x_lr, mask.stride);
    Tensor<T> up3({1, H, W});
    up3.data = up.data;
    Id prev = tape.leaf(std::move(up3), false);

    std::vector<Id> outs;
    outs.reserve(cfg.num_cascades);
    for (int k = 0; k < cfg.num_cascades; ++k) {
      const int s = cfg.share_stage_weights ? 0 : k;
      Id inp = cfg.use_dc ? tape.dc_overwrite(prev, x_lr, mask) : prev;
      Id res = rdhan_forward(tape, bound, stages[s], inp);
      prev = tape.add(prev, res);
      outs.push_back(prev);
    }
    return outs;
  }

  // Single restorer pass: shallow conv, RDHAB chain, global fusion over the
  // concatenated block outputs, global residual, reconstruction to 1 channel.
  Id rdhan_forward(Tape<T>& tape, const Bound& bound, const net::Rdhan& st,
                   Id input_1hw) const {
    Id f0 = conv(tape, bound, st.shallow, input_1hw);
    Id h = f0;
    std::vector<Id> outs;
    outs.reserve(st.blocks.size());
    for (const auto& blk : st.blocks) {
      h = rdb_forward(tape, bound, blk.rdb, h);
      if (cfg.use_hab) h = hab_forward(tape, bound, blk.hab, h);
      outs.push_back(h);
    }
    Id cat = tape.concat_ch(outs);
    Id g1 = conv(tape, bound, st.fuse1, cat);
    Id g2 = conv(tape, bound, st.fuse3, g1);
    Id g3 = tape.add(g2, f0);
    return conv(tape, bound, st.recon, g3);
  }

  Id rdb_forward(Tape<T>& tape, const Bound& bound, const net::Rdb& rdb,
                 Id x) const {
    Id cat = x;
    std::vector<Id> feats{x};
    for (const auto& cv : rdb.convs) {
      Id y = tape.relu(conv(tape, bound, cv, cat));
      feats.push_back(y);
      cat = tape.concat_ch(feats);
    }
    Id fused = conv(tape, bound, rdb.fusion, cat);
    return tape.add(fused, x);
  }

  // X1 = LN(X); X2 = (S)W-MSA(X1) + alpha * CAB(X1) + X; Y = MLP(LN(X2)) and,
  // unless configured to the literal form, Y + X2.
  Id hab_forward(Tape<T>& tape, const Bound& bound, const net::Hab& hab,
                 Id x) const {
    const auto& xv = tape.val(x);
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int w = cfg.window_size;
    if (H % w != 0 || W % w != 0)
      throw ShapeError("hab: feature sides must be divisible by window_size");
    const int shift = hab.shifted ? w / 2 : 0;

    Id x1 = tape.layer_norm_ch(x, bound.ids[hab.ln1.gain],
                               bound.ids[hab.ln1.bias], T(1e-5));
    Id att = wmsa_forward(tape, bound, hab, x1, shift);
    Id cb = cab_forward(tape, bound, hab.cab, x1);
    Id x2 = tape.add_scaled(tape.add(att, x), cb,
                            static_cast<T>(cfg.cab_alpha));
    Id x3 = tape.layer_norm_ch(x2, bound.ids[hab.ln2.gain],
                               bound.ids[hab.ln2.bias], T(1e-5));
    // MLP applied per spatial position
    Id tok = tape.gather(x3, chw_to_tokens_map(C, H, W),
                         {H * W, C});
    Id m1 = tape.gelu(tape.linear(tok, bound.ids[hab.mlp1.w],
                                  bound.ids[hab.mlp1.b]));
    Id m2 = tape.linear(m1, bound.ids[hab.mlp2.w], bound.ids[hab.mlp2.b]);
    Id y = tape.gather(m2, tokens_to_chw_map(C, H, W), {C, H, W});
    return cfg.hab_extra_residual ? tape.add(y, x2) : y;
  }

  // conv(3x3, C -> C/beta) -> GELU -> conv(3x3, C/beta -> C) -> channel
  // attention gate (GAP -> bottleneck -> sigmoid -> rescale).
  Id cab_forward(Tape<T>& tape, const Bound& bound, const net::Cab& cab,
                 Id x) const {
    Id m = tape.gelu(conv(tape, bound, cab.squeeze, x));
    Id e = conv(tape, bound, cab.expand, m);
    Id pooled = tape.global_avg_pool(e);  // [1, C]
    Id d = tape.relu(tape.linear(pooled, bound.ids[cab.ca_down.w],
                                 bound.ids[cab.ca_down.b]));
    Id u = tape.sigmoid(tape.linear(d, bound.ids[cab.ca_up.w],
                                    bound.ids[cab.ca_up.b]));
    return tape.channel_scale(e, u);
  }

  Id wmsa_forward(Tape<T>& tape, const Bound& bound, const net::Hab& hab,
                  Id x1, int shift) const {
    const auto& xv = tape.val(x1);
    const int C = xv.dim(0), H = xv.dim(1), W = xv.dim(2);
    const int w = cfg.window_size;
    const int heads = cfg.num_heads, d = cfg.head_dim();
    const int nW = (H / w) * (W / w), n = w * w;
    const int N = nW * n;

    Id tok = tape.gather(x1, window_partition_map(C, H, W, w, shift),
                         {N, C});
    Id qkv = tape.linear(tok, bound.ids[hab.qkv.w], bound.ids[hab.qkv.b]);
    Id q = tape.gather(qkv, head_split_map(nW, n, C, heads, d, 0),
                       {nW * heads, n, d});
    Id k = tape.gather(qkv, head_split_map(nW, n, C, heads, d, 1),
                       {nW * heads, n, d});
    Id v = tape.gather(qkv, head_split_map(nW, n, C, heads, d, 2),
                       {nW * heads, n, d});
    q = tape.scale(q, static_cast<T>(1.0 / std::sqrt(static_cast<double>(d))));
    Id scores = tape.bmm_nt(q, k);
    Id bias = tape.gather(bound.ids[hab.rel_bias],
                          rel_bias_map(w, heads), {heads, n, n});
    scores = tape.add_group_bias(scores, bias);
    if (shift > 0)
      scores = tape.add_window_mask(scores, shift_mask(H, W, w, shift));
    Id attn = tape.softmax_last(scores);
    Id ctx = tape.bmm(attn, v);
    Id merged = tape.gather(ctx, head_merge_map(nW, n, C, heads, d), {N, C});
    Id out = tape.linear(merged, bound.ids[hab.proj.w],
                         bound.ids[hab.proj.b]);
    return tape.gather(out, window_merge_map(C, H, W, w, shift), {C, H, W});
  }

  Id conv(Tape<T>& tape, const Bound& bound, const net::Conv& c, Id x) const {
    return tape.conv2d(x, bound.ids[c.w], bound.ids[c.b]);
  }

  // ---- index map construction (layout helpers; no learned state) ----

  static IndexMap chw_to_tokens_map(int C, int H, int W) {
    auto m = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(C) * H * W);
    const int plane = H * W;
    std::size_t o = 0;
    for (int t = 0; t < plane; ++t)
      for (int c = 0; c < C; ++c) (*m)[o++] = c * plane + t;
    return m;
  }

  static IndexMap tokens_to_chw_map(int C, int H, int W) {
    auto m = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(C) * H * W);
    const int plane = H * W;
    std::size_t o = 0;
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < plane; ++t) (*m)[o++] = t * C + c;
    return m;
  }

  // [C,H,W] -> [nW*n, C] tokens after a cyclic shift by (-shift, -shift).
  static IndexMap window_partition_map(int C, int H, int W, int w, int shift) {
    auto m = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(C) * H * W);
    const int plane = H * W;
    const int wx = W / w;
    std::size_t o = 0;
    for (int win = 0; win < (H / w) * wx; ++win) {
      const int wy = win / wx, wc = win % wx;
      for (int i = 0; i < w * w; ++i) {
        const int y = wy * w + i / w, x = wc * w + i % w;
        const int sy = (y + shift) % H, sx = (x + shift) % W;
        for (int c = 0; c < C; ++c) (*m)[o++] = c * plane + sy * W + sx;
      }
    }
    return m;
  }

  // tokens [nW*n, C] -> [C,H,W], inverting the shift.
  static IndexMap window_merge_map(int C, int H, int W, int w, int shift) {
    auto m = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(C) * H * W);
    const int wx = W / w;
    std::size_t o = 0;
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const int sy = (y - shift + H) % H, sx = (x - shift + W) % W;
          const int win = (sy / w) * wx + sx / w;
          const int i = (sy % w) * w + sx % w;
          (*m)[o++] = (win * w * w + i) * C + c;
        }
    return m;
  }

  // qkv [nW*n, 3C] -> one of Q/K/V as [nW*heads, n, d].
  static IndexMap head_split_map(int nW, int n, int C, int heads, int d,
                                 int part) {
    auto m = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(nW) * heads * n * d);
    std::size_t o = 0;
    for (int win = 0; win < nW; ++win)
      for (int h = 0; h < heads; ++h)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < d; ++j)
            (*m)[o++] = (win * n + i) * 3 * C + part * C + h * d + j;
    return m;
  }

  // ctx [nW*heads, n, d] -> [nW*n, C].
  static IndexMap head_merge_map(int nW, int n, int C, int heads, int d) {
    auto m = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(nW) * n * C);
    std::size_t o = 0;
    for (int win = 0; win < nW; ++win)
      for (int i = 0; i < n; ++i)
        for (int h = 0; h < heads; ++h)
          for (int j = 0; j < d; ++j)
            (*m)[o++] = ((win * heads + h) * n + i) * d + j;
    return m;
  }

  // relative-position bias table [(2w-1)^2, heads] -> [heads, n, n].
  static IndexMap rel_bias_map(int w, int heads) {
    const int n = w * w;
    auto m = std::make_shared<std::vector<int>>(
        static_cast<std::size_t>(heads) * n * n);
    std::size_t o = 0;
    for (int h = 0; h < heads; ++h)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const int dy = i / w - j / w + w - 1;
          const int dx = i % w - j % w + w - 1;
          (*m)[o++] = (dy * (2 * w - 1) + dx) * heads + h;
        }
    return m;
  }

  // Additive attention mask for shifted windows: tokens from different wrap
  // regions must not attend to each other.
  static Tensor<T> shift_mask(int H, int W, int w, int shift) {
    const int n = w * w, wx = W / w;
    const int nW = (H / w) * wx;
    std::vector<int> region(static_cast<std::size_t>(H) * W);
    auto rid = [&](int y, int lim) {
      if (y < lim - w) return 0;
      if (y < lim - shift) return 1;
      return 2;
    };
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        region[static_cast<std::size_t>(y) * W + x] =
            rid(y, H) * 3 + rid(x, W);
    Tensor<T> mask({nW, n, n});
    for (int win = 0; win < nW; ++win) {
      const int wy = win / wx, wc = win % wx;
      std::vector<int> ids(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        ids[i] = region[static_cast<std::size_t>(wy * w + i / w) * W +
                        (wc * w + i % w)];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          mask(win, i, j) = ids[i] == ids[j] ? T(0) : T(-100);
    }
    return mask;
  }

 private:
  net::Rdhan build_rdhan(const std::string& prefix) {
    const int C = cfg.channels, g = cfg.rdb_growth;
    net::Rdhan st;
    st.shallow = make_conv(prefix + "shallow", 1, C, 3);
    for (int b = 0; b < cfg.num_rdhab; ++b) {
      const std::string bp = prefix + "rdhab" + std::to_string(b) + ".";
      net::Rdhab blk;
      for (int l = 0; l < cfg.rdb_layers; ++l)
        blk.rdb.convs.push_back(make_conv(
            bp + "rdb.conv" + std::to_string(l), C + l * g, g, 3));
      blk.rdb.fusion =
          make_conv(bp + "rdb.fusion", C + cfg.rdb_layers * g, C, 1);
      blk.hab.ln1 = make_norm(bp + "hab.ln1", C);
      blk.hab.ln2 = make_norm(bp + "hab.ln2", C);
      blk.hab.qkv = make_linear(bp + "hab.qkv", C, 3 * C);
      blk.hab.proj = make_linear(bp + "hab.proj", C, C);
      const int t = 2 * cfg.window_size - 1;
      blk.hab.rel_bias =
          params.add(bp + "hab.rel_bias", {t * t, cfg.num_heads});
      blk.hab.cab.squeeze = make_conv(bp + "hab.cab.squeeze", C,
                                      cfg.cab_mid(), 3);
      blk.hab.cab.expand = make_conv(bp + "hab.cab.expand", cfg.cab_mid(),
                                     C, 3);
      blk.hab.cab.ca_down = make_linear(bp + "hab.cab.ca_down", C,
                                        cfg.ca_mid());
      blk.hab.cab.ca_up = make_linear(bp + "hab.cab.ca_up", cfg.ca_mid(), C);
      blk.hab.mlp1 = make_linear(bp + "hab.mlp1", C, cfg.mlp_hidden());
      blk.hab.mlp2 = make_linear(bp + "hab.mlp2", cfg.mlp_hidden(), C);
      blk.hab.shifted = (b % 2) == 1;
      st.blocks.push_back(std::move(blk));
    }
    st.fuse1 = make_conv(prefix + "fuse1", cfg.num_rdhab * C, C, 1);
    st.fuse3 = make_conv(prefix + "fuse3", C, C, 3);
    st.recon = make_conv(prefix + "recon", C, 1, 3);
    return st;
  }

  net::Conv make_conv(const std::string& name, int in_c, int out_c, int k) {
    net::Conv c;
    c.in_c = in_c;
    c.out_c = out_c;
    c.k = k;
    c.w = params.add(name + ".w", {out_c, in_c, k, k});
    c.b = params.add(name + ".b", {out_c});
    return c;
  }

  net::Linear make_linear(const std::string& name, int in_f, int out_f) {
    net::Linear l;
    l.in_f = in_f;
    l.out_f = out_f;
    l.w = params.add(name + ".w", {in_f, out_f});
    l.b = params.add(name + ".b", {out_f});
    return l;
  }

  net::Norm make_norm(const std::string& name, int c) {
    net::Norm n;
    n.gain = params.add(name + ".gain", {c});
    n.bias = params.add(name + ".bias", {c});
    return n;
  }

  void init_conv(const net::Conv& c, Rng& rng) {
    const double fan_in = static_cast<double>(c.in_c) * c.k * c.k;
    const double std = std::sqrt(2.0 / fan_in);
    for (auto& v : params.values[c.w].data)
      v = static_cast<T>(rng.normal(0.0, std));
  }
  void init_linear(const net::Linear& l, Rng& rng) {
    for (auto& v : params.values[l.w].data)
      v = static_cast<T>(rng.trunc_normal(0.02));
  }
  void init_trunc(int idx, Rng& rng) {
    for (auto& v : params.values[idx].data)
      v = static_cast<T>(rng.trunc_normal(0.02));
  }
  void set_ones(int idx) {
    for (auto& v : params.values[idx].data) v = T(1);
  }
};

// Hard data consistency applied outside the tape (inference-time finalize).
template <typename T>
Tensor<T> apply_final_dc(const Tensor<T>& pred, const Tensor<T>& obs,
                         const SamplingMask& m) {
  if (pred.rank() != 2 || pred.dim(0) != m.height || pred.dim(1) != m.width)
    throw ShapeError("apply_final_dc: prediction/mask mismatch");
  if (obs.dim(0) != m.rows_out() || obs.dim(1) != m.cols_out())
    throw ShapeError("apply_final_dc: observation/mask mismatch");
  Tensor<T> out = pred;
  for (int r = 0; r < m.rows_out(); ++r)
    for (int c = 0; c < m.cols_out(); ++c)
      out(m.off_row + r * m.stride, m.off_col + c * m.stride) = obs(r, c);
  return out;
}

}  // namespace s2s
