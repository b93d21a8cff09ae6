#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <random>
#include <vector>

#include "sincfb/filter_core.hpp"

using namespace sincfb;

namespace {

// Direct DFT magnitude at angular frequency w, no recurrence.
double dft_mag(const std::vector<double>& h, double w) {
  std::complex<double> acc = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n) acc += h[n] * std::polar(1.0, -w * static_cast<double>(n));
  return std::abs(acc);
}

}  // namespace

TEST(NormalizeCutoffs, SwapsIntoOrder) {
  const auto b = normalize_cutoffs({0.6, 0.2});
  EXPECT_EQ(b.a1, 0.2);
  EXPECT_EQ(b.a2, 0.6);
}

TEST(NormalizeCutoffs, AbsThenClamp) {
  const auto b = normalize_cutoffs({-0.5, 1.7});
  EXPECT_EQ(b.a1, 0.5);
  EXPECT_EQ(b.a2, 1.0);
}

TEST(NormalizeCutoffs, ZeroBandwidthAllowed) {
  const auto b = normalize_cutoffs({0.3, 0.3});
  EXPECT_EQ(b.a1, 0.3);
  EXPECT_EQ(b.a2, 0.3);
}

TEST(NormalizeCutoffs, RejectsNonFinite) {
  EXPECT_THROW(normalize_cutoffs({std::nan(""), 0.1}), InvalidParameter);
  EXPECT_THROW(normalize_cutoffs({0.1, std::numeric_limits<double>::infinity()}), InvalidParameter);
}

TEST(NormalizeCutoffs, FuzzStaysInUnitInterval) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> wide(0.0, 3.0);
  const double specials[] = {0.0, 1.0, -1.0, 1e9, -1e9, 1e-12, -1e-12};
  std::uniform_int_distribution<int> pick(0, 9);
  auto draw = [&] {
    const int k = pick(rng);
    return k < 7 ? specials[k] : wide(rng);
  };
  for (int i = 0; i < 20000; ++i) {
    const auto b = normalize_cutoffs({draw(), draw()});
    ASSERT_LE(0.0, b.a1);
    ASSERT_LE(b.a1, b.a2);
    ASSERT_LE(b.a2, 1.0);
  }
}

TEST(OriginalBand, ScalesHzByNyquistWithoutClamp) {
  const auto b = original_band({12000.0, -4000.0}, 16000.0);
  EXPECT_DOUBLE_EQ(b.a1, 0.5);
  EXPECT_DOUBLE_EQ(b.a2, 1.5);
}

TEST(IdealBandTaps, CenterIsBandwidth) {
  for (int L : {3, 31, 251}) {
    const auto h = ideal_band_taps({0.25, 0.75}, L);
    EXPECT_DOUBLE_EQ(h[L / 2], 0.5);
  }
}

TEST(IdealBandTaps, FullBandIsDelta) {
  const auto h = ideal_band_taps({0.0, 1.0}, 251);
  for (int n = 0; n < 251; ++n) EXPECT_NEAR(h[n], n == 125 ? 1.0 : 0.0, 1e-12) << n;
}

TEST(IdealBandTaps, OffCenterMatchesClosedForm) {
  const auto h = ideal_band_taps({0.2, 0.4}, 251);
  const double d = 5.0;
  const double expected = (std::sin(0.4 * M_PI * d) - std::sin(0.2 * M_PI * d)) / (M_PI * d);
  EXPECT_NEAR(h[130], expected, 1e-15);
  EXPECT_NEAR(h[120], expected, 1e-15);
}

TEST(IdealBandTaps, RejectsBadLength) {
  EXPECT_THROW(ideal_band_taps({0.1, 0.2}, 250), InvalidParameter);
  EXPECT_THROW(ideal_band_taps({0.1, 0.2}, 1), InvalidParameter);
}

TEST(HammingWindow, Endpoints) {
  const auto w = hamming_window(251);
  EXPECT_NEAR(w[0], 0.08, 1e-15);
  EXPECT_NEAR(w[250], 0.08, 1e-15);
  EXPECT_EQ(w[125], 1.0);
}

TEST(HammingWindow, ShortWindowFormula) {
  const auto w = hamming_window(5);
  const std::vector<double> expected = {0.08, 0.54 - 0.46 * std::cos(M_PI / 2), 1.0, 0.54 - 0.46 * std::cos(3 * M_PI / 2),
                                        0.08};
  for (int n = 0; n < 5; ++n) EXPECT_NEAR(w[n], expected[n], 1e-15);
  EXPECT_EQ(w[1], w[3]);
}

TEST(AssembleFilter, FullBandDelta) {
  const auto f = assemble_filter({0.0, 1.0}, 1.0, 251, Mode::reformed);
  EXPECT_EQ(f.taps[125], 1.0);
  for (int n = 0; n < 251; ++n)
    if (n != 125) {
      EXPECT_NEAR(f.taps[n], 0.0, 1e-12);
    }
}

TEST(AssembleFilter, GainScalesCenter) {
  const auto f = assemble_filter({0.25, 0.75}, 2.0, 31, Mode::reformed);
  EXPECT_DOUBLE_EQ(f.taps[15], 1.0);
}

TEST(AssembleFilter, MatchesProductOfFormulas) {
  const auto f = assemble_filter({0.2, 0.4}, 1.0, 251, Mode::reformed);
  for (int n = 0; n < 251; ++n) {
    const double d = n - 125;
    const double ideal = d == 0 ? 0.2 : (std::sin(0.4 * M_PI * d) - std::sin(0.2 * M_PI * d)) / (M_PI * d);
    const double w = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / 250.0);
    EXPECT_NEAR(f.taps[n], ideal * w, 1e-15) << n;
  }
}

TEST(AssembleFilter, RejectsNegativeGain) {
  EXPECT_THROW(assemble_filter({0.1, 0.2}, -0.1, 31, Mode::reformed), InvalidParameter);
}

TEST(AssembleFilter, ExactSymmetry) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5), g(0.0, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    const auto f = assemble_filter({u(rng), u(rng)}, g(rng), 63, Mode::reformed);
    for (int k = 0; k <= 31; ++k) ASSERT_EQ(f.taps[31 + k], f.taps[31 - k]);
  }
}

TEST(AssembleFilter, LinearInGain) {
  const auto a = assemble_filter({0.1, 0.45}, 1.0, 101, Mode::reformed);
  const auto b = assemble_filter({0.1, 0.45}, 3.0, 101, Mode::reformed);
  for (int n = 0; n < 101; ++n) EXPECT_NEAR(b.taps[n], 3.0 * a.taps[n], 1e-15);
}

TEST(FrequencyResponse, DeltaIsFlat) {
  std::vector<double> h(31, 0.0);
  h[15] = 1.0;
  for (double m : frequency_response(h, 257)) EXPECT_NEAR(m, 1.0, 1e-12);
}

TEST(FrequencyResponse, AgreesWithDirectDft) {
  const auto f = assemble_filter({0.2, 0.4}, 1.0, 251, Mode::reformed);
  const int grid = 513;
  const auto mag = frequency_response(f.taps, grid);
  for (int k = 0; k < grid; k += 8) EXPECT_NEAR(mag[k], dft_mag(f.taps, M_PI * k / (grid - 1)), 1e-10);
}

TEST(FrequencyResponse, PassbandAndStopband) {
  const double beta = 1.7;
  const auto f = assemble_filter({0.2, 0.4}, beta, 251, Mode::reformed);
  EXPECT_NEAR(20.0 * std::log10(dft_mag(f.taps, 0.3 * M_PI) / beta), 0.0, 0.5);
  const double margin = 8.0 * M_PI / 251.0;
  double peak = 0.0;
  for (int k = 0; k < 8192; ++k) {
    const double w = M_PI * k / 8191.0;
    if (w > 0.2 * M_PI - margin && w < 0.4 * M_PI + margin) continue;
    peak = std::max(peak, dft_mag(f.taps, w));
  }
  EXPECT_LT(20.0 * std::log10(peak / beta), -50.0);
}

TEST(FrequencyResponse, RejectsEmpty) { EXPECT_THROW(frequency_response(std::vector<double>{}, 16), InvalidParameter); }

TEST(ClassifyFilter, Examples) {
  EXPECT_EQ(classify_filter({0.001, 0.3}), FilterType::low_pass);
  EXPECT_EQ(classify_filter({0.6, 0.999}), FilterType::high_pass);
  EXPECT_EQ(classify_filter({0.2, 0.4}), FilterType::band_pass);
  EXPECT_EQ(classify_filter({0.3, 0.305}), FilterType::degenerate);
  EXPECT_EQ(classify_filter({0.0, 1.0}), FilterType::degenerate);
}

TEST(Filterbank, TapMatrixMatchesFilters) {
  Filterbank fb({{0.1, 0.3}, {0.5, 0.2}, {0.0, 1.0}}, {1.0, 0.5, 2.0}, 31, 16000.0, Mode::reformed);
  ASSERT_EQ(fb.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto row = fb.taps().row(i);
    for (int n = 0; n < 31; ++n) {
      EXPECT_EQ(row[n], fb.filter(i).taps[n]);
      EXPECT_NEAR(fb.unit_gain_taps()(i, n) * fb.filter(i).beta, row[n], 1e-15);
    }
  }
  EXPECT_EQ(fb.center(), 15);
  EXPECT_EQ(fb.filter(1).band, (NormalizedBand{0.2, 0.5}));
}

TEST(Filterbank, RejectsBadShapes) {
  EXPECT_THROW(Filterbank({}, 31, 16000.0, Mode::reformed), InvalidParameter);
  EXPECT_THROW(Filterbank({{0.1, 0.2}}, {1.0, 1.0}, 31, 16000.0, Mode::reformed), InvalidParameter);
  EXPECT_THROW(Filterbank({{0.1, 0.2}}, 30, 16000.0, Mode::reformed), InvalidParameter);
}

TEST(Modes, ParseRoundTrip) {
  EXPECT_EQ(parse_mode(to_string(Mode::original)), Mode::original);
  EXPECT_EQ(parse_mode("reformed"), Mode::reformed);
  EXPECT_THROW(parse_mode("other"), InvalidParameter);
}
