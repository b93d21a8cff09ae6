#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "sincfb/init_strategies.hpp"
#include "sincfb/pipeline.hpp"

using namespace sincfb;

namespace {

std::vector<double> randn(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

Filterbank random_bank(std::size_t n, int L, std::uint64_t seed) {
  return Filterbank(init_uniform(n, seed), L, 16000.0, Mode::reformed);
}

double inner(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST(Encode, ImpulseReproducesReversedTaps) {
  const int L = 31;
  const auto fb = random_bank(3, L, 4);
  std::vector<double> x(2 * L, 0.0);
  x[L - 1] = 1.0;
  const auto fm = encode(x, fb, 1);
  ASSERT_EQ(fm.frames(), static_cast<std::size_t>(L + 1));
  for (std::size_t i = 0; i < 3; ++i)
    for (int t = 0; t < L; ++t) EXPECT_EQ(fm.data(i, t), fb.taps()(i, L - 1 - t));
}

TEST(Encode, ZerosGiveZeros) {
  const auto fm = encode(std::vector<double>(100, 0.0), random_bank(4, 21, 1), 3);
  for (double v : fm.data.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(fm.frames(), (100u - 21u) / 3u + 1u);
}

TEST(Encode, MatchesDirectSum) {
  const auto fb = random_bank(2, 11, 8);
  const auto x = randn(60, 2);
  const std::size_t hop = 4;
  const auto fm = encode(x, fb, hop);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t t = 0; t < fm.frames(); ++t) {
      double s = 0.0;
      for (int l = 0; l < 11; ++l) s += x[t * hop + 10 - l] * fb.taps()(i, l);
      EXPECT_NEAR(fm.data(i, t), s, 1e-13);
    }
}

TEST(Encode, Linearity) {
  const auto fb = random_bank(3, 15, 2);
  const auto x = randn(80, 1), y = randn(80, 2);
  std::vector<double> z(80);
  for (int k = 0; k < 80; ++k) z[k] = 2.0 * x[k] - 0.5 * y[k];
  const auto fx = encode(x, fb, 2), fy = encode(y, fb, 2), fz = encode(z, fb, 2);
  for (std::size_t k = 0; k < fz.data.values().size(); ++k)
    EXPECT_NEAR(fz.data.values()[k], 2.0 * fx.data.values()[k] - 0.5 * fy.data.values()[k], 1e-12);
}

TEST(Encode, RejectsShortSignal) { EXPECT_THROW(encode(std::vector<double>(10, 0.0), random_bank(1, 11, 1), 1), InvalidParameter); }

TEST(LayerNormalize, ConstantRowBecomesZero) {
  FrameMatrix fm{Matrix(1, 8, 3.5), 1, 3, 10};
  const auto out = layer_normalize(fm, 1e-8);
  for (double v : out.data.values()) EXPECT_EQ(v, 0.0);
}

TEST(LayerNormalize, ZeroMeanUnitVariance) {
  FrameMatrix fm{Matrix(5, 400), 1, 31, 430};
  const auto v = randn(5 * 400, 3);
  std::copy(v.begin(), v.end(), fm.data.values().begin());
  const auto out = layer_normalize(fm, 1e-8);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto m = row_moments(out.data.row(i));
    EXPECT_LT(std::abs(m.mean), 1e-10);
    EXPECT_NEAR(m.stddev * m.stddev, 1.0, 1e-6);
  }
}

TEST(LayerNormalize, GainScalesVariance) {
  const auto fm = encode(randn(300, 4), random_bank(2, 21, 6), 1);
  const std::vector<double> gains{2.0, 0.5};
  const auto out = layer_normalize(fm, 1e-8, gains);
  const auto m0 = row_moments(out.data.row(0)), m1 = row_moments(out.data.row(1));
  EXPECT_NEAR(m0.stddev * m0.stddev, 4.0, 1e-5);
  EXPECT_NEAR(m1.stddev * m1.stddev, 0.25, 1e-6);
}

TEST(LayerNormalize, NeedsTwoFrames) {
  FrameMatrix fm{Matrix(2, 1, 1.0), 1, 3, 3};
  EXPECT_THROW(layer_normalize(fm, 1e-8), InvalidParameter);
}

TEST(Mask, SigmoidValues) {
  FrameMatrix fm{Matrix(3, 4, 1.0), 1, 3, 6};
  const std::vector<double> theta{0.0, 40.0, -40.0};
  const auto m = estimate_mask(fm, theta);
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(m.data(0, t), 0.5);
    EXPECT_NEAR(m.data(1, t), 1.0, 1e-15);
    EXPECT_NEAR(m.data(2, t), 0.0, 1e-15);
  }
  EXPECT_TRUE(std::isfinite(sigmoid(-1000.0)));
  EXPECT_TRUE(std::isfinite(sigmoid(1000.0)));
}

TEST(Mask, ApplyOnesZerosHalves) {
  const auto fm = encode(randn(64, 5), random_bank(3, 11, 2), 2);
  const Mask ones{Matrix(fm.channels(), fm.frames(), 1.0)};
  const Mask zeros{Matrix(fm.channels(), fm.frames(), 0.0)};
  const Mask half{Matrix(fm.channels(), fm.frames(), 0.5)};
  EXPECT_EQ(apply_mask(fm, ones).data, fm.data);
  const auto z = apply_mask(fm, zeros);
  for (double v : z.data.values()) EXPECT_EQ(v, 0.0);
  const auto h = apply_mask(fm, half);
  for (std::size_t k = 0; k < h.data.values().size(); ++k) EXPECT_EQ(h.data.values()[k], 0.5 * fm.data.values()[k]);
  EXPECT_THROW(apply_mask(fm, Mask{Matrix(1, 1)}), InvalidParameter);
}

TEST(DecodeTransposed, SingleFrameScatter) {
  const auto fb = random_bank(3, 11, 3);
  FrameMatrix fm{Matrix(3, 5), 2, 11, 19};
  fm.data(1, 3) = 1.0;
  const auto out = decode_transposed(fm, fb.taps());
  for (std::size_t n = 0; n < out.size(); ++n) {
    const bool inside = n >= 6 && n < 17;
    EXPECT_EQ(out[n], inside ? fb.taps()(1, n - 6) : 0.0) << n;
  }
}

TEST(DecodeTransposed, ZeroInputZeroOutput) {
  FrameMatrix fm{Matrix(2, 4), 3, 7, 16};
  const auto out = decode_transposed(fm, Matrix(2, 7, 1.0));
  ASSERT_EQ(out.size(), 16u);
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(DecodeTransposed, OverlapAddByHand) {
  Matrix synth(1, 5);
  for (int k = 0; k < 5; ++k) synth(0, k) = k + 1.0;
  FrameMatrix fm{Matrix(1, 2), 2, 5, 7};
  fm.data(0, 0) = 1.0;
  fm.data(0, 1) = -2.0;
  const auto out = decode_transposed(fm, synth);
  // frame 0 covers 0..4 with 1,2,3,4,5; frame 1 covers 2..6 with -2,-4,-6,-8,-10
  const std::vector<double> expected{1, 2, 3 - 2, 4 - 4, 5 - 6, -8, -10};
  EXPECT_EQ(out, expected);
}

TEST(DecodeTransposed, AdjointOfEncode) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t hop = 1 + trial % 5;
    const auto fb = random_bank(4, 21, 100 + trial);
    const auto x = randn(150, 200 + trial);
    const auto fx = encode(x, fb, hop);
    FrameMatrix y{Matrix(fx.channels(), fx.frames()), hop, 21, x.size()};
    const auto yv = randn(y.data.values().size(), 300 + trial);
    std::copy(yv.begin(), yv.end(), y.data.values().begin());
    const double lhs = inner(fx.data.values(), y.data.values());
    const double rhs = inner(x, decode_transposed(y, fb.taps()));
    EXPECT_LT(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300), 1e-8);
  }
}

TEST(DecodeLinearCombination, EqualWeightsGiveChannelMean) {
  const auto fm = encode(randn(50, 1), random_bank(4, 11, 2), 1);
  const auto out = decode_linear_combination(fm, std::vector<double>(4, 0.3));
  for (std::size_t t = 0; t < fm.frames(); ++t) {
    double mean = 0.0;
    for (std::size_t i = 0; i < 4; ++i) mean += fm.data(i, t) / 4.0;
    EXPECT_NEAR(out[t + 10], mean, 1e-14);
  }
  for (int n = 0; n < 10; ++n) EXPECT_EQ(out[n], 0.0);
}

TEST(DecodeLinearCombination, SaturatedWeightSelectsChannel) {
  const auto fm = encode(randn(50, 1), random_bank(3, 11, 2), 1);
  const auto out = decode_linear_combination(fm, std::vector<double>{-500.0, 500.0, -500.0});
  for (std::size_t t = 0; t < fm.frames(); ++t) EXPECT_NEAR(out[t + 10], fm.data(1, t), 1e-14);
}

TEST(DecodeLinearCombination, RequiresHopOne) {
  const auto fm = encode(randn(50, 1), random_bank(2, 11, 2), 2);
  EXPECT_THROW(decode_linear_combination(fm, std::vector<double>(2, 0.0)), UnsupportedConfiguration);
}

TEST(Softmax, SumsToOne) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 30.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(1 + trial % 17);
    for (double& v : z) v = g(rng);
    const auto p = softmax(z);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(PseudoInverse, PenroseIdentityOnMelBank) {
  const Filterbank fb(init_mel(80), 251, 16000.0, Mode::reformed);
  const Matrix f = analysis_matrix(fb.taps());
  const Matrix p = pseudo_inverse(f);
  ASSERT_EQ(p.rows(), 251u);
  ASSERT_EQ(p.cols(), 80u);
  // F * (P * F), accumulated naively
  Matrix pf(251, 251);
  for (std::size_t r = 0; r < 251; ++r)
    for (std::size_t k = 0; k < 80; ++k) {
      const double a = p(r, k);
      for (std::size_t c = 0; c < 251; ++c) pf(r, c) += a * f(k, c);
    }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 80; ++i)
    for (std::size_t c = 0; c < 251; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < 251; ++r) s += f(i, r) * pf(r, c);
      num += (s - f(i, c)) * (s - f(i, c));
      den += f(i, c) * f(i, c);
    }
  EXPECT_LT(std::sqrt(num / den), 1e-10);
}

TEST(PseudoInverse, ProjectionIsIdempotentUnderReencoding) {
  const int L = 31;
  const auto fb = random_bank(6, L, 9);
  const auto x = randn(5 * L, 4);
  const auto fm = encode(x, fb, L);
  const auto xr = decode_pinv(fm, fb);
  const auto fm2 = encode(xr, fb, L);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < fm.data.values().size(); ++k) {
    const double d = fm2.data.values()[k] - fm.data.values()[k];
    num += d * d;
    den += fm.data.values()[k] * fm.data.values()[k];
  }
  EXPECT_LT(std::sqrt(num / den), 1e-8);
}

TEST(PseudoInverse, ZeroFeaturesZeroSignal) {
  const auto fb = random_bank(4, 21, 3);
  FrameMatrix fm{Matrix(4, 6), 5, 21, 46};
  for (double v : decode_pinv(fm, fb)) EXPECT_EQ(v, 0.0);
}

TEST(PseudoInverse, AllZeroBankIsSingular) {
  const Filterbank fb({{0.1, 0.2}, {0.3, 0.4}}, {0.0, 0.0}, 11, 16000.0, Mode::reformed);
  EXPECT_THROW(pseudo_inverse(analysis_matrix(fb.taps())), SingularOperator);
}

TEST(ParameterCount, SincVersusDense) {
  const Filterbank fb(init_mel(80), 251, 16000.0, Mode::reformed);
  const auto lc = parameter_count(fb, DecoderVariant::linear_combination);
  EXPECT_EQ(lc.encoder_sinc, 240u);
  EXPECT_EQ(lc.encoder_dense, 20080u);
  EXPECT_EQ(lc.decoder, 80u);
  EXPECT_EQ(parameter_count(fb, DecoderVariant::pseudo_inverse).decoder, 0u);
  EXPECT_EQ(parameter_count(fb, DecoderVariant::transposed).decoder, 20080u);
}

TEST(Model, IdentityPathDelaysByCenter) {
  const int L = 51;
  EnhancementModel m{Filterbank({{0.0, 1.0}}, L, 16000.0, Mode::reformed), {40.0},
                     LinearCombinationDecoder{{0.0}}, PipelineConfig{1, false, 1e-8}};
  const auto x = randn(300, 6);
  const auto y = enhance(m, x);
  const auto a = output_alignment(DecoderVariant::linear_combination, L, x.size());
  for (std::size_t k = 0; k < a.length; ++k) EXPECT_NEAR(y[a.out_begin + k], x[a.ref_begin + k], 1e-12);
  for (std::size_t n = L - 1; n < 300; ++n) EXPECT_NEAR(y[n], x[n - 25], 1e-12);
  for (std::size_t n = 0; n < L - 1; ++n) EXPECT_EQ(y[n], 0.0);
}

TEST(Model, ValidateCatchesMismatches) {
  EnhancementModel m{Filterbank({{0.1, 0.5}}, 11, 16000.0, Mode::reformed), {0.0, 0.0},
                     LinearCombinationDecoder{{0.0}}, PipelineConfig{}};
  EXPECT_THROW(validate(m), InvalidParameter);
  m.mask_logits = {0.0};
  m.config.hop = 2;
  EXPECT_THROW(validate(m), UnsupportedConfiguration);
}

TEST(Decoders, ParseNames) {
  EXPECT_EQ(parse_decoder_variant("lc"), DecoderVariant::linear_combination);
  EXPECT_EQ(parse_decoder_variant("pinv"), DecoderVariant::pseudo_inverse);
  EXPECT_EQ(parse_decoder_variant(to_string(DecoderVariant::transposed)), DecoderVariant::transposed);
  EXPECT_THROW(parse_decoder_variant("other"), InvalidParameter);
}
