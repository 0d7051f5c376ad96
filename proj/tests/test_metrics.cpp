#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "s2s/metrics.hpp"
#include "s2s/rng.hpp"

using namespace s2s;

namespace {

Tensor<double> random_grid(int h, int w, Rng& rng, double scale = 1.0) {
  Tensor<double> t({h, w});
  for (auto& v : t.data) v = rng.uniform(-scale, scale);
  return t;
}

Tensor<std::uint8_t> full_region(int h, int w) {
  return Tensor<std::uint8_t>({h, w}, 1);
}

// Reference SSIM via a different algorithmic route: separable 1D Gaussian
// filtering of the moment maps (the implementation does direct 2D window
// sums per center).
double ssim_reference(const Tensor<double>& a, const Tensor<double>& b,
                      const Tensor<std::uint8_t>& region) {
  const int H = a.dim(0), W = a.dim(1);
  const int win = 11, r = win / 2;
  const double sigma = 1.5;
  std::vector<double> k1d(win);
  double sum = 0;
  for (int i = 0; i < win; ++i) {
    k1d[i] = std::exp(-(i - r) * (i - r) / (2.0 * sigma * sigma));
    sum += k1d[i];
  }
  // dynamic range from a over the region
  double lo = 0, hi = 0;
  bool seen = false;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    if (region.data[i] == 0) continue;
    if (!seen) { lo = hi = a.data[i]; seen = true; }
    lo = std::min(lo, a.data[i]);
    hi = std::max(hi, a.data[i]);
  }
  const double L = hi - lo;
  const double C1 = (0.01 * L) * (0.01 * L), C2 = (0.03 * L) * (0.03 * L);

  auto filt = [&](const std::vector<double>& img) {
    // horizontal then vertical pass, valid centers only
    std::vector<double> tmp(static_cast<std::size_t>(H) * W, 0.0);
    for (int y = 0; y < H; ++y)
      for (int x = r; x < W - r; ++x) {
        double acc = 0;
        for (int j = -r; j <= r; ++j)
          acc += k1d[static_cast<std::size_t>(j + r)] *
                 img[static_cast<std::size_t>(y) * W + x + j];
        tmp[static_cast<std::size_t>(y) * W + x] = acc / sum;
      }
    std::vector<double> out(static_cast<std::size_t>(H) * W, 0.0);
    for (int y = r; y < H - r; ++y)
      for (int x = r; x < W - r; ++x) {
        double acc = 0;
        for (int j = -r; j <= r; ++j)
          acc += k1d[static_cast<std::size_t>(j + r)] *
                 tmp[static_cast<std::size_t>(y + j) * W + x];
        out[static_cast<std::size_t>(y) * W + x] = acc / sum;
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
  const auto mu_a = filt(av), mu_b = filt(bv);
  const auto raa = filt(aa), rbb = filt(bb), rab = filt(ab);
  double acc = 0;
  std::int64_t n = 0;
  for (int y = r; y < H - r; ++y)
    for (int x = r; x < W - r; ++x) {
      if (region(y, x) == 0) continue;
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const double va = raa[i] - mu_a[i] * mu_a[i];
      const double vb = rbb[i] - mu_b[i] * mu_b[i];
      const double cov = rab[i] - mu_a[i] * mu_b[i];
      acc += ((2 * mu_a[i] * mu_b[i] + C1) * (2 * cov + C2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2));
      ++n;
    }
  return acc / static_cast<double>(n);
}

}  // namespace

TEST(Mae, IdentityAndExample) {
  Rng rng(1);
  const auto a = random_grid(4, 4, rng);
  EXPECT_EQ(mae(a, a, full_region(4, 4)), 0.0);

  Tensor<double> x({2, 2}), y({2, 2});
  x.data = {0, 1, 2, 3};
  y.data = {1, 1, 2, 5};
  EXPECT_NEAR(mae(x, y, full_region(2, 2)), 0.75, 1e-15);

  Tensor<std::uint8_t> one({2, 2});
  one(1, 1) = 1;
  EXPECT_NEAR(mae(x, y, one), 2.0, 1e-15);
}

TEST(Mae, TriangleBound) {
  Rng rng(2);
  const auto region = full_region(6, 6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = random_grid(6, 6, rng);
    const auto b = random_grid(6, 6, rng);
    const auto c = random_grid(6, 6, rng);
    EXPECT_LE(mae(a, c, region), mae(a, b, region) + mae(b, c, region) + 1e-12);
  }
}

TEST(Mae, EmptyRegionThrows) {
  Tensor<double> a({2, 2}, 0.0);
  Tensor<std::uint8_t> empty({2, 2});
  EXPECT_THROW(mae(a, a, empty), EmptyRegion);
}

TEST(Pcc, AffineAndSymmetryCases) {
  Rng rng(3);
  const auto a = random_grid(5, 5, rng);
  Tensor<double> b = a;
  for (auto& v : b.data) v = 2.0 * v + 3.0;
  EXPECT_NEAR(pcc(a, b, full_region(5, 5)), 1.0, 1e-12);
  Tensor<double> neg = a;
  for (auto& v : neg.data) v = -v;
  EXPECT_EQ(pcc(a, neg, full_region(5, 5)), -1.0);
  EXPECT_EQ(pcc(a, a, full_region(5, 5)), 1.0);  // exact
}

TEST(Pcc, TwoPassOracle) {
  Rng rng(4);
  const auto a = random_grid(8, 8, rng);
  const auto b = random_grid(8, 8, rng);
  // textbook two-pass covariance
  double ma = 0, mb = 0;
  for (std::int64_t i = 0; i < 64; ++i) {
    ma += a.data[i];
    mb += b.data[i];
  }
  ma /= 64;
  mb /= 64;
  double va = 0, vb = 0, cov = 0;
  for (std::int64_t i = 0; i < 64; ++i) {
    va += (a.data[i] - ma) * (a.data[i] - ma);
    vb += (b.data[i] - mb) * (b.data[i] - mb);
    cov += (a.data[i] - ma) * (b.data[i] - mb);
  }
  EXPECT_NEAR(pcc(a, b, full_region(8, 8)), cov / std::sqrt(va) / std::sqrt(vb),
              1e-10);
}

TEST(Pcc, AffineInvariance) {
  Rng rng(5);
  const auto a = random_grid(6, 6, rng);
  const auto b = random_grid(6, 6, rng);
  const double base = pcc(a, b, full_region(6, 6));
  Tensor<double> a2 = a;
  for (auto& v : a2.data) v = 4.2 * v - 7.0;
  EXPECT_NEAR(pcc(a2, b, full_region(6, 6)), base, 1e-12);
}

TEST(Pcc, ConstantInputRejected) {
  Tensor<double> c({3, 3}, 2.0);
  Rng rng(6);
  const auto b = random_grid(3, 3, rng);
  EXPECT_THROW(pcc(c, b, full_region(3, 3)), DegenerateInput);
}

TEST(Ssim, IdentityIsExactlyOne) {
  Rng rng(7);
  const auto a = random_grid(16, 16, rng);
  EXPECT_EQ(ssim(a, a, full_region(16, 16)), 1.0);
}

TEST(Ssim, SymmetricUnderFixedRange) {
  Rng rng(8);
  const auto a = random_grid(16, 16, rng);
  const auto b = random_grid(16, 16, rng);
  const auto region = full_region(16, 16);
  EXPECT_NEAR(ssim(a, b, region, 4.0), ssim(b, a, region, 4.0), 1e-12);
}

TEST(Ssim, MatchesReferenceImplementation) {
  // fixed 16x16 pattern pair
  Tensor<double> a({16, 16}), b({16, 16});
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      a(y, x) = std::sin(0.4 * y) + 0.3 * std::cos(0.7 * x);
      b(y, x) = a(y, x) + 0.1 * std::sin(0.9 * (x + y));
    }
  const auto region = full_region(16, 16);
  EXPECT_NEAR(ssim(a, b, region), ssim_reference(a, b, region), 1e-6);

  Rng rng(9);
  const auto c = random_grid(20, 17, rng);
  const auto d = random_grid(20, 17, rng);
  const auto r2 = full_region(20, 17);
  EXPECT_NEAR(ssim(c, d, r2), ssim_reference(c, d, r2), 1e-6);
}

TEST(Ssim, DegenerateAndShapeErrors) {
  Tensor<double> c({16, 16}, 1.0);
  Rng rng(10);
  const auto b = random_grid(16, 16, rng);
  EXPECT_THROW(ssim(c, b, full_region(16, 16)), DegenerateInput);
  const auto small = random_grid(8, 8, rng);
  EXPECT_THROW(ssim(small, small, full_region(8, 8)), ShapeError);
}

TEST(Evaluate, IdentityTripleAndRecomposition) {
  Rng rng(11);
  const auto truth = random_grid(16, 16, rng);
  const auto region = full_region(16, 16);
  const auto r = evaluate(truth, truth, region);
  EXPECT_EQ(r.mae, 0.0);
  EXPECT_EQ(r.pcc, 1.0);
  EXPECT_EQ(r.ssim, 1.0);
  EXPECT_EQ(r.region_size, 256);

  const auto pred = random_grid(16, 16, rng);
  const auto rep = evaluate(pred, truth, region);
  EXPECT_EQ(rep.mae, mae(truth, pred, region));
  EXPECT_EQ(rep.pcc, pcc(truth, pred, region));
  EXPECT_EQ(rep.ssim, ssim(truth, pred, region));
}
