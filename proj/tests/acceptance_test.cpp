// Acceptance suite: one test per criterion, each printing a [CRITERION n]
// PASS/FAIL line. Fast property suites come first; the end-to-end benchmark
// and the ablation matrix run last. All tolerances are pinned here.

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "s2s/s2s.hpp"

using namespace s2s;
namespace fs = std::filesystem;

namespace {

struct CriterionBanner {
  int number;
  std::string summary;
  explicit CriterionBanner(int n, std::string s)
      : number(n), summary(std::move(s)) {}
  ~CriterionBanner() {
    std::printf("[CRITERION %d] %s — %s\n", number,
                ::testing::Test::HasFailure() ? "FAIL" : "PASS",
                summary.c_str());
    std::fflush(stdout);
  }
};

template <typename T>
Tensor<T> random_grid(int h, int w, Rng& rng, double lo = -2.0,
                      double hi = 2.0) {
  Tensor<T> t({h, w});
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

CdcinConfig tiny_grad_config() {
  // pinned by the criterion: C=4, one cascade, one RDHAB, window 4
  CdcinConfig cfg;
  cfg.num_cascades = 1;
  cfg.num_rdhab = 1;
  cfg.channels = 4;
  cfg.rdb_growth = 4;
  cfg.rdb_layers = 2;
  cfg.window_size = 4;
  cfg.num_heads = 2;
  cfg.mlp_ratio = 2.0;
  return cfg;
}

// ---- criterion 8/9 pinned configurations ----

SynthSpec acceptance_field() {
  SynthSpec spec;  // 128x128, 12 blobs, seed 7 (pinned by the criterion)
  spec.height = spec.width = 128;
  spec.num_blobs = 12;
  spec.seed = 7;
  spec.blob_sigma_min = 1.5;
  spec.blob_sigma_max = 5.0;
  spec.amp_min = 0.5;
  spec.amp_max = 3.0;
  spec.noise_sigma = 0.25;
  spec.tissue = TissueShape::Full;
  return spec;
}

RunConfig desk_scale_config() {
  RunConfig cfg;  // C=16, K=2, 2 RDHABs, window 8 (pinned); rest desk-scale
  cfg.model.num_cascades = 2;
  cfg.model.num_rdhab = 2;
  cfg.model.channels = 16;
  cfg.model.rdb_growth = 16;
  cfg.model.rdb_layers = 4;
  cfg.model.window_size = 8;
  cfg.model.num_heads = 2;
  cfg.model.mlp_ratio = 2.0;
  cfg.train.epochs = 300;  // pinned by the criterion
  cfg.train.batch_size = 4;
  cfg.train.learning_rate = 1e-3;
  cfg.train.patch = 64;
  cfg.train.stride = 2;
  cfg.train.crop_stride = 32;
  cfg.train.checkpoint_every = 1000;
  cfg.train.seed = 1;
  cfg.infer.window_stride = 32;
  return cfg;
}

}  // namespace

TEST(Criterion1, PaperScaleReproductionNotAttempted) {
  CriterionBanner banner(
      1,
      "paper-scale dataset reproduction is out of scope; property-based "
      "criteria 2-10 substitute");
  // the toolkit must expose the property-based substitutes end to end
  SUCCEED();
}

TEST(Criterion2, DataConsistencyHardConstraint) {
  CriterionBanner banner(2,
                         "DC overwrite bit-exact on 100 randomized cases; "
                         "final inference DC exact over the slide");
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int s = 1 + static_cast<int>(rng.uniform_int(3));
    const int h = s * (1 + static_cast<int>(rng.uniform_int(8)));
    const int w = s * (1 + static_cast<int>(rng.uniform_int(8)));
    const auto m = make_mask(h, w, s, static_cast<int>(rng.uniform_int(s)),
                             static_cast<int>(rng.uniform_int(s)));
    auto est = random_grid<float>(h, w, rng);
    Tensor<float> est3({1, h, w});
    est3.data = est.data;
    const auto obs = random_grid<float>(h / s, w / s, rng);
    Tape<float> tape(false);
    const auto& out = tape.val(tape.dc_overwrite(tape.leaf(est3), obs, m));
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) {
        if (m.at(r, c))
          ASSERT_EQ(out(0, r, c), obs(r / s, c / s));  // bit-exact
        else
          ASSERT_EQ(out(0, r, c), est(r, c));
      }
  }

  // trained-weight model, final DC on: downsample(prediction) == observation
  CdcinConfig mc = tiny_grad_config();
  mc.window_size = 8;
  auto model = CdcinModel<float>::build(mc);
  Rng wrng(22);
  model.init_params(wrng);
  for (auto& v : model.params.values[model.stages[0].recon.w].data)
    v = static_cast<float>(wrng.uniform(-0.1, 0.1));
  for (int trial = 0; trial < 4; ++trial) {
    GeneGrid sparse;
    sparse.values = random_grid<float>(32, 32, wrng, 0.0, 2.0);
    sparse.tissue = Tensor<std::uint8_t>({32, 32}, 1);
    const auto result = infer_slide(model, sparse, 2, 32, 16, "uniform");
    const auto m = make_mask(64, 64, 2);
    const auto back = downsample(result.grid.values, m);
    ASSERT_EQ(back.data, sparse.values.data);  // exact
  }
}

TEST(Criterion3, MaskAlgebraSuite) {
  CriterionBanner banner(3, "downsample/scatter identities exact over 1000 "
                            "randomized cases");
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int s = 1 + static_cast<int>(rng.uniform_int(4));
    const int h = s * (1 + static_cast<int>(rng.uniform_int(10)));
    const int w = s * (1 + static_cast<int>(rng.uniform_int(10)));
    const auto m = make_mask(h, w, s, static_cast<int>(rng.uniform_int(s)),
                             static_cast<int>(rng.uniform_int(s)));
    const auto y = random_grid<float>(h / s, w / s, rng);
    ASSERT_EQ(downsample(scatter(y, m), m).data, y.data);
    const auto x = random_grid<float>(h, w, rng);
    const auto masked = scatter(downsample(x, m), m);
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        ASSERT_EQ(masked(r, c), m.at(r, c) ? x(r, c) : 0.0f);
    ASSERT_EQ(m.popcount(), static_cast<std::int64_t>(h) * w / (s * s));
  }
}

TEST(Criterion4, ZeroParameterIdentity) {
  CriterionBanner banner(4, "all-zero weights: every cascade stage equals the "
                            "upsampled input, max abs deviation 0");
  auto cfg = tiny_grad_config();
  cfg.num_cascades = 3;
  auto model = CdcinModel<float>::build(cfg);
  model.zero_params();
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    const auto x_lr = random_grid<float>(8, 8, rng);
    const auto mask = make_mask(16, 16, 2);
    Tape<float> tape(false);
    auto bound = model.bind(tape, false);
    const auto outs = model.forward(tape, bound, x_lr, mask);
    const auto up = upsample_bilinear(x_lr, 2);
    float max_dev = 0.0f;
    for (auto id : outs) {
      const auto& v = tape.val(id);
      for (std::int64_t i = 0; i < v.numel(); ++i)
        max_dev = std::max(max_dev, std::abs(v.data[i] - up.data[i]));
    }
    ASSERT_EQ(max_dev, 0.0f);
  }
}

TEST(Criterion5, GradientCheckTinyConfigDoublePrecision) {
  CriterionBanner banner(5, "analytic vs central-difference gradients "
                            "(h=1e-5) on >= 200 random parameters, rel err "
                            "< 1e-4");
  auto cfg = tiny_grad_config();
  auto model = CdcinModel<double>::build(cfg);
  Rng rng(51);
  model.init_params(rng);
  for (auto& v : model.params.values[model.stages[0].recon.w].data)
    v = rng.uniform(-0.05, 0.05);

  const int P = 8, S = 2;  // 8x8 patch pinned by the criterion
  const auto x_m = random_grid<double>(P / S, P / S, rng, 0.0, 1.0);
  const auto m_h = make_mask(P, P, S);
  const auto m_m = make_mask(P / S, P / S, S);
  const auto x_l = downsample(x_m, m_m);
  const auto target_h = random_grid<double>(P, P, rng, 0.0, 1.0);

  // smooth scalar loss over both forward passes, exercising the dense-branch
  // gather: sum of squared residuals on (x_l -> medium) and on
  // D(x_m -> high, m_h) against the compacted target
  const auto target_hm = downsample(target_h, m_h);
  auto loss_value = [&]() {
    Tape<double> tape(false);
    auto bound = model.bind(tape, false);
    double total = 0.0;
    {
      const auto outs = model.forward(tape, bound, x_l, m_m);
      const auto& o = tape.val(outs.back());
      for (std::int64_t i = 0; i < o.numel(); ++i) {
        const double d = o.data[i] - x_m.data[i];
        total += d * d / 16.0;
      }
    }
    {
      const auto outs = model.forward(tape, bound, x_m, m_h);
      Tensor<double> o2({P, P});
      o2.data = tape.val(outs.back()).data;
      const auto gathered = downsample(o2, m_h);
      for (std::int64_t i = 0; i < gathered.numel(); ++i) {
        const double d = gathered.data[i] - target_hm.data[i];
        total += d * d / 16.0;
      }
    }
    return total;
  };

  // analytic gradients via the tape
  Tape<double> tape;
  auto bound = model.bind(tape, true);
  std::vector<typename Tape<double>::Id> terms;
  {
    const auto outs = model.forward(tape, bound, x_l, m_m);
    Tensor<double> t3({1, P / S, P / S});
    t3.data = x_m.data;
    auto diff = tape.sub(outs.back(), tape.leaf(t3, false));
    terms.push_back(tape.mean_weighted(tape.mul(diff, diff), nullptr, 16.0));
  }
  {
    const auto outs = model.forward(tape, bound, x_m, m_h);
    auto gathered = tape_loss::downsample_stage(tape, outs.back(), m_h);
    Tensor<double> t3({1, P / S, P / S});
    t3.data = target_hm.data;
    auto diff = tape.sub(gathered, tape.leaf(t3, false));
    terms.push_back(tape.mean_weighted(tape.mul(diff, diff), nullptr, 16.0));
  }
  tape.backward(tape.weighted_sum(terms, {1.0, 1.0}));

  const double h = 1e-5;  // pinned by the criterion
  const auto t0 = std::chrono::steady_clock::now();
  Rng pick(52);
  int checked = 0, guarded = 0;
  while (checked < 200) {
    const auto pi = pick.uniform_int(model.params.size());
    auto& tensor = model.params.values[pi];
    if (tensor.numel() == 0) continue;
    const auto k = pick.uniform_int(static_cast<std::uint64_t>(tensor.numel()));
    const double orig = tensor.data[k];
    tensor.data[k] = orig + h;
    const double up = loss_value();
    tensor.data[k] = orig - h;
    const double down = loss_value();
    tensor.data[k] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double an = tape.grad(bound.ids[pi]).data[k];
    // gradients below the finite-difference noise floor at h=1e-5 are held
    // to an absolute bound instead of a meaningless relative one
    if (std::max(std::abs(fd), std::abs(an)) < 1e-6) {
      ASSERT_LT(std::abs(fd - an), 1e-9);
      ++guarded;
    } else {
      ASSERT_LT(std::abs(fd - an) / std::max(std::abs(fd), std::abs(an)),
                1e-4)
          << model.params.names[pi] << "[" << k << "]";
    }
    ++checked;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::printf("  criterion 5: %d parameters checked (%d below noise floor) "
              "in %.1f s\n",
              checked, guarded, secs);
  EXPECT_LT(secs, 120.0);
}

TEST(Criterion6, LossFormulaOracle) {
  CriterionBanner banner(6, "cascade L1 matches hand-unrolled equations "
                            "within 1e-7; total within 1e-12; lambda=10 "
                            "default");
  Rng rng(61);
  // K = 3 on random tensors, both branch shapes
  for (int trial = 0; trial < 20; ++trial) {
    const int P = 16, S = 2;
    const auto x_h = random_grid<double>(P, P, rng, 0.0, 2.0);
    auto triple = make_triple_from_dense(x_h, S, Domain::GNI);
    std::vector<Tensor<double>> outs_m, outs_h;
    for (int k = 0; k < 3; ++k) {
      outs_m.push_back(random_grid<double>(P / S, P / S, rng, 0.0, 2.0));
      outs_h.push_back(random_grid<double>(P, P, rng, 0.0, 2.0));
    }
    const auto [lm, lh] = gni_losses(outs_m, outs_h, triple);
    double em = 0.0, eh = 0.0;
    for (int k = 1; k <= 3; ++k) {
      double am = 0.0, ah = 0.0;
      for (std::int64_t i = 0; i < triple.x_m.numel(); ++i)
        am += std::abs(outs_m[k - 1].data[i] - triple.x_m.data[i]);
      for (std::int64_t i = 0; i < x_h.numel(); ++i)
        ah += std::abs(outs_h[k - 1].data[i] - x_h.data[i]);
      em += (k / 3.0) * am / ((P / S) * (P / S));
      eh += (k / 3.0) * ah / (P * P);
    }
    ASSERT_NEAR(lm, em, 1e-7);
    ASSERT_NEAR(lh, eh, 1e-7);

    // ST branch with tissue restriction
    Tensor<std::uint8_t> tissue({P / S, P / S});
    for (auto& v : tissue.data) v = rng.coin() ? 1 : 0;
    tissue(0, 0) = 1;
    auto st = make_triple_from_medium(triple.x_m, S, P, &tissue);
    const auto [sm, sh] = st_losses(outs_m, outs_h, st);
    double pop = 0;
    for (auto v : tissue.data) pop += v ? 1 : 0;
    double esm = 0.0, esh = 0.0;
    for (int k = 1; k <= 3; ++k) {
      double am = 0.0, ah = 0.0;
      for (std::int64_t i = 0; i < st.x_m.numel(); ++i)
        if (tissue.data[i])
          am += std::abs(outs_m[k - 1].data[i] - st.x_m.data[i]);
      const auto gathered = downsample(outs_h[k - 1], st.m_h);
      for (std::int64_t i = 0; i < gathered.numel(); ++i)
        if (tissue.data[i])
          ah += std::abs(gathered.data[i] - st.x_m.data[i]);
      esm += (k / 3.0) * am / pop;
      esh += (k / 3.0) * ah / pop;
    }
    ASSERT_NEAR(sm, esm, 1e-7);
    ASSERT_NEAR(sh, esh, 1e-7);

    const auto breakdown = total_loss(sm, sh, lm, lh, 10.0);
    ASSERT_NEAR(breakdown.total, 10.0 * (sm + sh) + (lm + lh), 1e-12);
  }
  ASSERT_DOUBLE_EQ(RunConfig{}.train.lambda, 10.0);  // default honored
}

namespace reference_metrics {

// independent implementations for criterion 7 (separable-filter SSIM route)
double mae_ref(const Tensor<double>& a, const Tensor<double>& b) {
  double acc = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i)
    acc += std::abs(a.data[i] - b.data[i]);
  return acc / static_cast<double>(a.numel());
}

double pcc_ref(const Tensor<double>& a, const Tensor<double>& b) {
  const std::int64_t n = a.numel();
  double ma = 0, mb = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= n;
  mb /= n;
  double va = 0, vb = 0, cov = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    va += (a.data[i] - ma) * (a.data[i] - ma);
    vb += (b.data[i] - mb) * (b.data[i] - mb);
    cov += (a.data[i] - ma) * (b.data[i] - mb);
  }
  return cov / std::sqrt(va) / std::sqrt(vb);
}

double ssim_ref(const Tensor<double>& a, const Tensor<double>& b) {
  const int H = a.dim(0), W = a.dim(1), win = 11, r = win / 2;
  std::vector<double> k1d(win);
  double ks = 0;
  for (int i = 0; i < win; ++i) {
    k1d[i] = std::exp(-(i - r) * (i - r) / (2.0 * 1.5 * 1.5));
    ks += k1d[i];
  }
  double lo = a.data[0], hi = a.data[0];
  for (double v : a.data) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double L = hi - lo;
  const double C1 = 0.01 * L * 0.01 * L, C2 = 0.03 * L * 0.03 * L;
  auto filt = [&](const std::vector<double>& img) {
    std::vector<double> tmp(img.size(), 0.0), out(img.size(), 0.0);
    for (int y = 0; y < H; ++y)
      for (int x = r; x < W - r; ++x) {
        double acc = 0;
        for (int j = -r; j <= r; ++j)
          acc += k1d[j + r] * img[y * W + x + j];
        tmp[y * W + x] = acc / ks;
      }
    for (int y = r; y < H - r; ++y)
      for (int x = r; x < W - r; ++x) {
        double acc = 0;
        for (int j = -r; j <= r; ++j)
          acc += k1d[j + r] * tmp[(y + j) * W + x];
        out[y * W + x] = acc / ks;
      }
    return out;
  };
  std::vector<double> av(a.data.begin(), a.data.end());
  std::vector<double> bv(b.data.begin(), b.data.end());
  std::vector<double> aa(av.size()), bb(av.size()), ab(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    aa[i] = av[i] * av[i];
    bb[i] = bv[i] * bv[i];
    ab[i] = av[i] * bv[i];
  }
  const auto mu_a = filt(av), mu_b = filt(bv), raa = filt(aa), rbb = filt(bb),
             rab = filt(ab);
  double acc = 0;
  int n = 0;
  for (int y = r; y < H - r; ++y)
    for (int x = r; x < W - r; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const double va = raa[i] - mu_a[i] * mu_a[i];
      const double vb = rbb[i] - mu_b[i] * mu_b[i];
      const double cov = rab[i] - mu_a[i] * mu_b[i];
      acc += ((2 * mu_a[i] * mu_b[i] + C1) * (2 * cov + C2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2));
      ++n;
    }
  return acc / n;
}

}  // namespace reference_metrics

TEST(Criterion7, MetricOracles) {
  CriterionBanner banner(7, "MAE/PCC/SSIM match independent references on "
                            "16x16 fixtures within 1e-6; identities exact");
  // fixed 16x16 fixtures
  Tensor<double> a({16, 16}), b({16, 16});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      a(y, x) = std::sin(0.37 * y + 0.11) + 0.4 * std::cos(0.53 * x);
      b(y, x) = a(y, x) + 0.15 * std::sin(0.83 * (x + 2 * y));
    }
  const Tensor<std::uint8_t> region({16, 16}, 1);
  ASSERT_NEAR(mae(a, b, region), reference_metrics::mae_ref(a, b), 1e-6);
  ASSERT_NEAR(pcc(a, b, region), reference_metrics::pcc_ref(a, b), 1e-6);
  ASSERT_NEAR(ssim(a, b, region), reference_metrics::ssim_ref(a, b), 1e-6);

  Rng rng(71);
  const auto c = random_grid<double>(16, 16, rng);
  const auto d = random_grid<double>(16, 16, rng);
  ASSERT_NEAR(mae(c, d, region), reference_metrics::mae_ref(c, d), 1e-6);
  ASSERT_NEAR(pcc(c, d, region), reference_metrics::pcc_ref(c, d), 1e-6);
  ASSERT_NEAR(ssim(c, d, region), reference_metrics::ssim_ref(c, d), 1e-6);

  // identity cases: exactly (0, 1, 1)
  const auto rep = evaluate(a, a, region);
  ASSERT_EQ(rep.mae, 0.0);
  ASSERT_EQ(rep.pcc, 1.0);
  ASSERT_EQ(rep.ssim, 1.0);
}

TEST(Criterion10, DeterminismAndResumability) {
  CriterionBanner banner(10, "identical seeds give bit-identical loss logs; "
                             "checkpoint resume matches the uninterrupted "
                             "run");
  RunConfig cfg;
  cfg.model.num_cascades = 1;
  cfg.model.num_rdhab = 1;
  cfg.model.channels = 8;
  cfg.model.rdb_growth = 8;
  cfg.model.rdb_layers = 2;
  cfg.model.window_size = 8;
  cfg.model.num_heads = 2;
  cfg.model.mlp_ratio = 2.0;
  cfg.train.patch = 32;
  cfg.train.crop_stride = 16;
  cfg.train.batch_size = 4;
  cfg.train.epochs = 4;
  cfg.train.learning_rate = 1e-3;
  cfg.train.checkpoint_every = 2;
  cfg.train.seed = 77;

  SynthSpec spec;
  spec.height = spec.width = 64;
  spec.num_blobs = 6;
  spec.noise_sigma = 0.15;
  spec.seed = 5;
  const auto truth = gen_field(spec);
  auto [sparse, mask] = simulate_sparse(truth, 2);
  (void)mask;
  TrainDataset data;
  data.slide_medium = sparse;
  data.corpus = make_procedural_corpus(8, 64, 3);

  const auto base = fs::temp_directory_path() /
                    ("s2s_accept10_" + std::to_string(::getpid()));
  fs::remove_all(base);
  fs::create_directories(base);

  run_training(cfg, data, (base / "a").string());
  run_training(cfg, data, (base / "b").string());
  ASSERT_EQ(read_text((base / "a" / "loss_log.jsonl").string()),
            read_text((base / "b" / "loss_log.jsonl").string()));

  auto full = run_training(cfg, data, (base / "full").string());
  auto part_cfg = cfg;
  part_cfg.train.epochs = 2;
  run_training(part_cfg, data, (base / "part").string());
  auto resumed =
      run_training(cfg, data, (base / "resumed").string(),
                   (base / "part" / "ckpt_epoch2.s2sckpt").string());
  for (std::size_t i = 0; i < full.model.params.size(); ++i)
    ASSERT_EQ(full.model.params.values[i].data,
              resumed.model.params.values[i].data);
  fs::remove_all(base);
}

TEST(Criterion9, AblationMatrixStructure) {
  CriterionBanner banner(9, "ablation matrix {baseline, +GNI, +DC, +both, "
                            "K in 1..3} completes; combined-vs-singles "
                            "direction reported");
  SynthSpec dataset;
  dataset.height = dataset.width = 64;
  dataset.num_blobs = 8;
  dataset.blob_sigma_min = 1.5;
  dataset.blob_sigma_max = 5.0;
  dataset.noise_sigma = 0.2;
  dataset.seed = 7;

  RunConfig base;
  base.model.num_cascades = 2;
  base.model.num_rdhab = 1;
  base.model.channels = 8;
  base.model.rdb_growth = 8;
  base.model.rdb_layers = 2;
  base.model.window_size = 8;
  base.model.num_heads = 2;
  base.model.mlp_ratio = 2.0;
  base.train.patch = 32;
  base.train.crop_stride = 16;
  base.train.batch_size = 4;
  base.train.epochs = 40;
  base.train.learning_rate = 1e-3;
  base.train.checkpoint_every = 1000;
  base.train.seed = 1;
  base.infer.window_stride = 16;

  const auto matrix = default_matrix(dataset, base);
  const auto result = run_matrix(matrix);
  ASSERT_EQ(result.rows.size(), 7u);
  for (const auto& row : result.rows)
    ASSERT_TRUE(row.ok) << row.name << ": " << row.error;

  const auto& direction = result.summary.at("direction_check");
  ASSERT_TRUE(direction.at("present").get<bool>());
  const double both = direction.at("both_mae").get<double>();
  const double gni = direction.at("gni_mae").get<double>();
  const double dc = direction.at("dc_mae").get<double>();
  std::printf("  criterion 9: MAE both=%.5f gni=%.5f dc=%.5f -> direction %s\n",
              both, gni, dc,
              direction.at("holds").get<bool>() ? "holds" : "VIOLATED");
  if (!direction.at("holds").get<bool>()) {
    // reported, not hidden: the desk-scale direction is informational
    std::printf("  criterion 9: combined variant did not dominate both "
                "single additions at desk scale (reported)\n");
  }
  // the structural requirement: every variant trained, improvements table
  // recomputes from raw rows
  for (const auto& row : result.summary.at("rows")) {
    if (row.at("variant") == "baseline" || !row.contains("mae_impr_pct"))
      continue;
    const double base_mae =
        result.summary.at("rows")[0].at("mae").get<double>();
    const double mae_v = row.at("mae").get<double>();
    ASSERT_NEAR(row.at("mae_impr_pct").get<double>(),
                100.0 * (base_mae - mae_v) / base_mae, 1e-9);
  }
}

TEST(Criterion8, EndToEndSyntheticBenchmark) {
  CriterionBanner banner(8, "desk-scale model beats the best classical "
                            "baseline by >= 10% MAE with higher PCC");
  const auto t0 = std::chrono::steady_clock::now();

  const auto spec = acceptance_field();
  const auto cfg = desk_scale_config();
  const auto truth = gen_field(spec);
  auto [sparse, mask] = simulate_sparse(truth, cfg.train.stride);
  (void)mask;

  // classical baselines on held-out dense truth
  double best_mae = 1e300, best_pcc = -1e300;
  std::string best_mae_method, best_pcc_method;
  for (const char* method : {"nearest", "bilinear", "bicubic"}) {
    const auto up = baseline_interpolate(sparse, cfg.train.stride, method);
    const auto rep = evaluate(up.values, truth.values, truth.tissue);
    std::printf("  criterion 8: baseline %-8s mae %.5f pcc %.5f ssim %.5f\n",
                method, rep.mae, rep.pcc, rep.ssim);
    if (rep.mae < best_mae) {
      best_mae = rep.mae;
      best_mae_method = method;
    }
    if (rep.pcc > best_pcc) {
      best_pcc = rep.pcc;
      best_pcc_method = method;
    }
  }

  TrainDataset data;
  data.slide_medium = sparse;
  data.corpus = make_procedural_corpus(
      24, std::max(96, cfg.train.patch + cfg.train.patch / 2),
      derive_seed(cfg.train.seed, 0x6e1));
  auto state = run_training(cfg, data);

  const auto inferred =
      infer_slide(state.model, sparse, cfg.train.stride, cfg.train.patch,
                  cfg.infer.window_stride, cfg.infer.weighting);
  const auto rep = evaluate(inferred.grid.values, truth.values, truth.tissue);
  const double mins =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count() /
      60.0;
  std::printf("  criterion 8: model            mae %.5f pcc %.5f ssim %.5f "
              "(%.1f min CPU)\n",
              rep.mae, rep.pcc, rep.ssim, mins);
  std::printf("  criterion 8: MAE margin vs best baseline (%s): %.1f%% "
              "(threshold >= 10%%); PCC %.5f vs %.5f (%s)\n",
              best_mae_method.c_str(), 100.0 * (best_mae - rep.mae) / best_mae,
              rep.pcc, best_pcc, best_pcc_method.c_str());

  EXPECT_LE(rep.mae, 0.9 * best_mae);  // >= 10% lower than best baseline
  EXPECT_GT(rep.pcc, best_pcc);        // and higher correlation
  EXPECT_LT(mins, 90.0);               // CPU-only runtime bound
}
