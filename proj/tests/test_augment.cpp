#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "phrl/augment.hpp"

using namespace phrl;

namespace {

GrayImage random_gray(int w, int h, uint64_t seed) {
  Rng rng(seed);
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = uint8_t(rng.uniform_int(0, 255));
  return img;
}

DepthImage random_depth(int w, int h, uint64_t seed, double dmax = 1.2) {
  Rng rng(seed);
  DepthImage img(w, h);
  for (auto& p : img.pixels) p = float(rng.uniform(0.05, dmax));
  return img;
}

}  // namespace

TEST(Brightness, PinnedFormula) {
  GrayImage img(1, 1);
  img.at(0, 0) = 192;
  EXPECT_EQ(brightness_contrast(img, 2.0, 0.0).at(0, 0), 255);   // clamped from 256
  img.at(0, 0) = 100;
  EXPECT_EQ(brightness_contrast(img, 0.0, 7.0).at(0, 0), 135);   // constant 128 + beta
  const GrayImage r = random_gray(19, 11, 3);
  EXPECT_TRUE(brightness_contrast(r, 1.0, 0.0) == r);             // identity parameters
}

TEST(Blur, GaussianKernelNormalizedSymmetric) {
  const auto k = detail::gaussian_kernel(7);
  EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(k[i], k[6 - i]);
  EXPECT_GT(k[3], k[2]);
  EXPECT_THROW(detail::gaussian_kernel(4), ConfigError);
}

TEST(Blur, ConstantImagePreservedAllKinds) {
  const GrayImage img(15, 9, 77);
  EXPECT_TRUE(blur(img, BlurKind::Gaussian, 5) == img);
  EXPECT_TRUE(blur(img, BlurKind::Motion, 5, 0.7) == img);
  EXPECT_TRUE(blur(img, BlurKind::Median, 5) == img);
}

TEST(Blur, MotionSmearsAlongAngle) {
  GrayImage img(7, 7, 0);
  img.at(3, 3) = 255;
  const GrayImage h = blur(img, BlurKind::Motion, 3, 0.0);
  EXPECT_EQ(h.at(2, 3), 85);
  EXPECT_EQ(h.at(3, 3), 85);
  EXPECT_EQ(h.at(4, 3), 85);
  EXPECT_EQ(h.at(3, 2), 0);
  const GrayImage v = blur(img, BlurKind::Motion, 3, M_PI / 2);
  EXPECT_EQ(v.at(3, 2), 85);
  EXPECT_EQ(v.at(3, 4), 85);
  EXPECT_EQ(v.at(2, 3), 0);
}

TEST(Blur, MedianRejectsImpulse) {
  GrayImage img(5, 5, 10);
  img.at(2, 2) = 255;
  const GrayImage out = blur(img, BlurKind::Median, 3);
  EXPECT_EQ(out.at(2, 2), 10);
  EXPECT_TRUE(blur(img, BlurKind::Median, 1) == img);
}

TEST(Solarize, PinnedCases) {
  GrayImage img = random_gray(13, 8, 5);
  EXPECT_TRUE(solarize(img, 256) == img);                 // nothing qualifies
  const GrayImage inv = solarize(img, 0);                 // full inversion
  for (size_t i = 0; i < img.pixels.size(); ++i)
    EXPECT_EQ(inv.pixels[i], 255 - img.pixels[i]);
  // Pixels in [100, 155] invert into [100, 155], so applying twice with
  // t = 100 returns the original.
  GrayImage band(16, 4);
  Rng rng(9);
  for (auto& p : band.pixels) p = uint8_t(rng.uniform_int(100, 155));
  EXPECT_TRUE(solarize(solarize(band, 100), 100) == band);
}

TEST(Filter2d, SharpenStepOvershoot) {
  GrayImage img(6, 1);
  for (int x = 0; x < 6; ++x) img.at(x, 0) = x < 3 ? 10 : 80;
  const GrayImage out = filter2d(img, FilterKind::Sharpen);
  EXPECT_EQ(out.at(0, 0), 10);
  EXPECT_EQ(out.at(1, 0), 10);
  EXPECT_EQ(out.at(2, 0), 0);     // 10 - 70 clamped
  EXPECT_EQ(out.at(3, 0), 150);   // 80 + 70
  EXPECT_EQ(out.at(4, 0), 80);
  const GrayImage c(9, 9, 123);
  EXPECT_TRUE(filter2d(c, FilterKind::Sharpen) == c);   // kernel sums to 1
}

TEST(Filter2d, EmbossConstantAddsOffset) {
  EXPECT_EQ(filter2d(GrayImage(5, 5, 100), FilterKind::Emboss).at(2, 2), 228);
  EXPECT_EQ(filter2d(GrayImage(5, 5, 200), FilterKind::Emboss).at(2, 2), 255);   // clamped
}

TEST(HistEq, PinnedMappings) {
  GrayImage two(4, 1);
  two.at(0, 0) = 0;
  two.at(1, 0) = 0;
  two.at(2, 0) = 255;
  two.at(3, 0) = 255;
  const GrayImage eq = hist_eq(two);
  EXPECT_EQ(eq.at(0, 0), 0);      // extremes preserved
  EXPECT_EQ(eq.at(3, 0), 255);

  GrayImage mid(4, 1);
  mid.at(0, 0) = 100;
  mid.at(1, 0) = 100;
  mid.at(2, 0) = 200;
  mid.at(3, 0) = 200;
  const GrayImage stretched = hist_eq(mid);
  EXPECT_EQ(stretched.at(0, 0), 0);     // lowest value maps to 0
  EXPECT_EQ(stretched.at(3, 0), 255);   // full-range stretch

  const GrayImage c(7, 7, 42);
  EXPECT_TRUE(hist_eq(c) == c);   // constant image unchanged
}

TEST(HistEq, MappingIsMonotone) {
  const GrayImage img = random_gray(64, 64, 17);
  const GrayImage eq = hist_eq(img);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    for (size_t j = 0; j < img.pixels.size(); j += 97)
      if (img.pixels[i] <= img.pixels[j]) EXPECT_LE(eq.pixels[i], eq.pixels[j]);
}

TEST(Clahe, ReducesToHistEqWithOneTile) {
  const GrayImage img = random_gray(48, 32, 23);
  const GrayImage a = clahe(img, std::numeric_limits<double>::infinity(), 1);
  EXPECT_TRUE(a == hist_eq(img));
  const GrayImage c(10, 10, 50);
  EXPECT_TRUE(clahe(c, 3.0, 4) == c);   // constant stays constant
}

TEST(Clahe, TiledOutputWellFormed) {
  GrayImage img(40, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 40; ++x) img.at(x, y) = uint8_t(x < 20 ? 40 + y : 180 + (y % 40));
  const GrayImage out = clahe(img, 2.5, 4);
  EXPECT_EQ(out.width, 40);
  EXPECT_EQ(out.height, 40);
  EXPECT_FALSE(out == img);
}

TEST(Jpeg, QuantTablePinnedScaling) {
  const auto q100 = detail::jpeg_quant_table(100);
  for (int v : q100) EXPECT_EQ(v, 1);                       // S=0 clamps to all ones
  const auto q50 = detail::jpeg_quant_table(50);
  for (int i = 0; i < 64; ++i) EXPECT_EQ(q50[i], detail::kJpegLuminance[i]);
  EXPECT_THROW(detail::jpeg_quant_table(0), ConfigError);
  EXPECT_THROW(detail::jpeg_quant_table(101), ConfigError);
}

TEST(Jpeg, Quality100NearlyLossless) {
  GrayImage img(32, 24);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 32; ++x) img.at(x, y) = uint8_t((x * 5 + y * 3) % 256);
  const GrayImage out = jpeg_artifacts(img, 100);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    EXPECT_LE(std::abs(int(out.pixels[i]) - int(img.pixels[i])), 1);
}

TEST(Jpeg, ConstantBlockStaysUniform) {
  for (int q : {1, 10, 40, 75, 100}) {
    const GrayImage out = jpeg_artifacts(GrayImage(16, 16, 137), q);
    uint8_t lo = 255, hi = 0;
    for (uint8_t v : out.pixels) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    EXPECT_LE(hi - lo, 1) << "quality " << q;
  }
}

TEST(Jpeg, LowQualityKillsHighFrequency) {
  GrayImage board(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) board.at(x, y) = (x + y) % 2 ? 144 : 112;
  auto variance = [](const GrayImage& g) {
    double m = 0.0;
    for (uint8_t v : g.pixels) m += v;
    m /= double(g.pixels.size());
    double s = 0.0;
    for (uint8_t v : g.pixels) s += (v - m) * (v - m);
    return s / double(g.pixels.size());
  };
  const double before = variance(board);
  const double after = variance(jpeg_artifacts(board, 1));
  EXPECT_LT(after, 0.5 * before);
}

TEST(Noise, SigmaZeroIsIdentityAndSeeded) {
  const GrayImage img = random_gray(24, 24, 31);
  Rng a(5), b(5), c(6);
  EXPECT_TRUE(noise(img, NoiseKind::Gaussian, 0.0, a) == img);
  const GrayImage n1 = noise(img, NoiseKind::Gaussian, 10.0, a);
  Rng a2(5);
  noise(img, NoiseKind::Gaussian, 0.0, a2);   // same draw prefix
  const GrayImage n2 = noise(img, NoiseKind::Gaussian, 10.0, a2);
  EXPECT_TRUE(n1 == n2);
  EXPECT_FALSE(noise(img, NoiseKind::Gaussian, 10.0, b) ==
               noise(img, NoiseKind::Gaussian, 10.0, c));
}

TEST(Noise, GaussianSampleSigma) {
  const GrayImage img(128, 128, 128);
  Rng rng(41);
  const GrayImage out = noise(img, NoiseKind::Gaussian, 10.0, rng);
  double sum = 0.0, sum2 = 0.0;
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    const double d = double(out.pixels[i]) - 128.0;
    sum += d;
    sum2 += d * d;
  }
  const double n = double(out.pixels.size());
  const double sd = std::sqrt(sum2 / n - (sum / n) * (sum / n));
  EXPECT_NEAR(sd, 10.0, 1.0);   // within 10% over 16k pixels
}

TEST(Noise, MultiplicativeOnDepth) {
  const DepthImage img(100, 100, 0.5f);
  Rng rng(43);
  const DepthImage out = noise(img, NoiseKind::Multiplicative, 0.1, rng, 1.2);
  double sum = 0.0, sum2 = 0.0;
  for (float v : out.pixels) {
    sum += v;
    sum2 += double(v) * v;
  }
  const double n = double(out.pixels.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  EXPECT_NEAR(mean, 0.5, 0.005);
  EXPECT_NEAR(sd, 0.05, 0.005);
}

TEST(Noise, DepthInvalidPixelsUntouched) {
  DepthImage img(8, 8, 0.4f);
  img.at(3, 3) = 0.0f;
  Rng rng(47);
  const DepthImage out = noise(img, NoiseKind::Gaussian, 0.05, rng, 1.2);
  EXPECT_EQ(out.at(3, 3), 0.0f);
}

TEST(ThresholdDilate, PinnedMorphology) {
  DepthImage valid(9, 9, 0.5f);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_TRUE(threshold_dilate(valid, inf, 1) == valid);   // nothing invalid to grow

  DepthImage one = valid;
  one.at(4, 4) = 0.0f;
  const DepthImage plus = threshold_dilate(one, inf, 1);
  int invalid = 0;
  for (float v : plus.pixels) invalid += v == 0.0f;
  EXPECT_EQ(invalid, 5);   // plus-shaped L1 ball of radius 1
  EXPECT_EQ(plus.at(3, 4), 0.0f);
  EXPECT_EQ(plus.at(5, 4), 0.0f);
  EXPECT_EQ(plus.at(4, 3), 0.0f);
  EXPECT_EQ(plus.at(4, 5), 0.0f);
  EXPECT_NE(plus.at(3, 3), 0.0f);   // diagonal stays valid

  const DepthImage diamond = threshold_dilate(one, inf, 2);
  invalid = 0;
  for (float v : diamond.pixels) invalid += v == 0.0f;
  EXPECT_EQ(invalid, 13);   // |dx|+|dy| <= 2

  // Thresholding drops far pixels, then the mask grows.
  DepthImage far(5, 5, 0.4f);
  far.at(2, 2) = 1.0f;
  const DepthImage cut = threshold_dilate(far, 0.8, 0);
  EXPECT_EQ(cut.at(2, 2), 0.0f);
  EXPECT_EQ(cut.at(1, 2), 0.4f);

  const DepthImage dead(6, 6, 0.0f);
  EXPECT_TRUE(threshold_dilate(dead, 0.5, 2) == dead);   // all-invalid absorbing
}

TEST(CoarseDropout, CountsAndFill) {
  const GrayImage img(20, 20, 100);
  Rng rng(51);
  EXPECT_TRUE(coarse_dropout(img, false, 0, 4, rng) == img);
  const GrayImage all = coarse_dropout(img, false, 1, 20, rng);
  for (uint8_t v : all.pixels) EXPECT_EQ(v, 0);
  Rng r2(53);
  const GrayImage salted = coarse_dropout(img, true, 3, 5, r2);
  int changed = 0;
  for (uint8_t v : salted.pixels) {
    if (v != 100) {
      EXPECT_EQ(v, 255);
      ++changed;
    }
  }
  EXPECT_GT(changed, 0);
  EXPECT_LE(changed, 3 * 25);

  DepthImage d(20, 20, 0.5f);
  Rng r3(55);
  const DepthImage saltd = coarse_dropout(d, true, 2, 4, r3, 1.2);
  for (float v : saltd.pixels) EXPECT_TRUE(v == 0.5f || v == 1.2f);
}

TEST(Pipeline, EmptyAndZeroProbabilityAreIdentity) {
  const GrayImage img = random_gray(33, 17, 61);
  Rng rng(1);
  AugSpec empty;
  EXPECT_TRUE(apply_pipeline(img, empty, rng) == img);
  AugSpec zeroed = default_gray_spec();
  for (auto& op : zeroed.ops) op.probability = 0.0;
  EXPECT_TRUE(apply_pipeline(img, zeroed, rng) == img);
}

TEST(Pipeline, DeterministicGivenSeed) {
  const GrayImage img = random_gray(64, 64, 63);
  const AugSpec spec = default_gray_spec();
  Rng a(77), b(77), c(78);
  const GrayImage o1 = apply_pipeline(img, spec, a);
  const GrayImage o2 = apply_pipeline(img, spec, b);
  EXPECT_TRUE(o1 == o2);
  EXPECT_FALSE(apply_pipeline(img, spec, c) == o1);

  const DepthImage d = random_depth(64, 64, 65);
  const AugSpec dspec = default_depth_spec();
  Rng da(81), db(81);
  EXPECT_TRUE(apply_pipeline(d, dspec, da, 1.2) == apply_pipeline(d, dspec, db, 1.2));
}

TEST(Pipeline, SingleOpMatchesDirectCall) {
  const GrayImage img = random_gray(40, 30, 67);
  AugSpec spec;
  spec.channel = AugChannel::Gray;
  spec.ops.push_back({"brightness_contrast", 1.0, {{"alpha", {1.3, 1.3}}, {"beta", {5, 5}}}});
  Rng rng(3);
  EXPECT_TRUE(apply_pipeline(img, spec, rng) == brightness_contrast(img, 1.3, 5.0));
}

TEST(Pipeline, ChannelAndNameErrors) {
  const GrayImage img = random_gray(16, 16, 71);
  const DepthImage d = random_depth(16, 16, 73);
  Rng rng(5);
  EXPECT_THROW(apply_pipeline(img, default_depth_spec(), rng), ChannelMismatchError);
  EXPECT_THROW(apply_pipeline(d, default_gray_spec(), rng, 1.2), ChannelMismatchError);

  AugSpec bad;
  bad.channel = AugChannel::Gray;
  bad.ops.push_back({"warp", 0.5, {}});
  EXPECT_THROW(apply_pipeline(img, bad, rng), UnknownOpError);

  AugSpec depth_only;
  depth_only.channel = AugChannel::Gray;
  depth_only.ops.push_back({"threshold_dilate", 0.5, {{"threshold", {0.5, 1.0}}, {"radius", {1, 2}}}});
  EXPECT_THROW(apply_pipeline(img, depth_only, rng), UnknownOpError);

  AugSpec badp = default_gray_spec();
  badp.ops[0].probability = 1.5;
  EXPECT_THROW(apply_pipeline(img, badp, rng), ConfigError);
}

TEST(Pipeline, DefaultSpecsMatchRegisteredSets) {
  const AugSpec g = default_gray_spec();
  const AugSpec d = default_depth_spec();
  EXPECT_EQ(g.ops.size(), 12u);
  EXPECT_EQ(d.ops.size(), 10u);
  for (const auto& op : g.ops) EXPECT_DOUBLE_EQ(op.probability, 0.3);
  for (const auto& op : d.ops) EXPECT_DOUBLE_EQ(op.probability, 0.3);
  EXPECT_NO_THROW(validate(g));
  EXPECT_NO_THROW(validate(d));
  // Depth ranges sit at twice the grayscale width where ops overlap.
  auto find = [](const AugSpec& s, const std::string& name) {
    for (const auto& op : s.ops)
      if (op.name == name) return op;
    throw std::runtime_error("missing op " + name);
  };
  const auto gs = find(g, "gaussian_blur").params[0].second;
  const auto ds = find(d, "gaussian_blur").params[0].second;
  EXPECT_DOUBLE_EQ(ds[1] - ds[0], 2.0 * (gs[1] - gs[0]));
  const auto gm = find(g, "mult_noise").params[0].second;
  const auto dm = find(d, "mult_noise").params[0].second;
  EXPECT_DOUBLE_EQ(dm[1] - dm[0], 2.0 * (gm[1] - gm[0]));
}

TEST(Pipeline, ShapeAndRangePreservedEverywhere) {
  const GrayImage img = random_gray(37, 21, 83);
  AugSpec g = default_gray_spec();
  for (auto& op : g.ops) op.probability = 1.0;   // force every op to fire
  Rng rng(7);
  const GrayImage out = apply_pipeline(img, g, rng);
  EXPECT_EQ(out.width, 37);
  EXPECT_EQ(out.height, 21);

  const DepthImage d = random_depth(37, 21, 85);
  AugSpec ds = default_depth_spec();
  for (auto& op : ds.ops) op.probability = 1.0;
  Rng rng2(9);
  const DepthImage dout = apply_pipeline(d, ds, rng2, 1.2);
  EXPECT_EQ(dout.width, 37);
  EXPECT_EQ(dout.height, 21);
  for (float v : dout.pixels) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.2f);
  }
}
