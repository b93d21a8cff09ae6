#pragma once

// Initial cutoff sets: uniform draws, sampling from a formant-like magnitude curve, and
// contiguous Mel-spaced bands. All outputs are Nyquist-normalized raw values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "filter_core.hpp"

namespace sincfb {

enum class InitStrategy { uniform, formant, mel };

inline std::string_view to_string(InitStrategy s) {
  switch (s) {
    case InitStrategy::uniform: return "uniform";
    case InitStrategy::formant: return "formant";
    case InitStrategy::mel: return "mel";
  }
  return "unknown";
}

inline InitStrategy parse_init_strategy(std::string_view s) {
  if (s == "uniform") return InitStrategy::uniform;
  if (s == "formant") return InitStrategy::formant;
  if (s == "mel") return InitStrategy::mel;
  throw InvalidParameter("unknown init strategy: " + std::string(s));
}

/// Magnitude curve sampled on an ascending Hz grid.
struct TabulatedCurve {
  std::vector<double> freqs;
  std::vector<double> values;

  void validate() const {
    if (freqs.size() != values.size()) throw InvalidParameter("curve: freqs/values length mismatch");
    if (freqs.size() < 2) throw InvalidParameter("curve: need at least 2 points");
    bool any_positive = false;
    for (std::size_t k = 0; k < freqs.size(); ++k) {
      if (!std::isfinite(freqs[k]) || !std::isfinite(values[k])) throw InvalidParameter("curve: non-finite entry");
      if (k > 0 && !(freqs[k] > freqs[k - 1])) throw InvalidParameter("curve: freqs must be strictly ascending");
      if (values[k] < 0.0) throw InvalidParameter("curve: values must be >= 0");
      any_positive = any_positive || values[k] > 0.0;
    }
    if (!any_positive) throw InvalidParameter("curve: all-zero magnitude");
  }

  /// Piecewise-linear interpolation, constant beyond either end.
  double at(double f) const {
    if (f <= freqs.front()) return values.front();
    if (f >= freqs.back()) return values.back();
    const auto it = std::upper_bound(freqs.begin(), freqs.end(), f);
    const std::size_t hi = static_cast<std::size_t>(it - freqs.begin());
    const std::size_t lo = hi - 1;
    const double t = (f - freqs[lo]) / (freqs[hi] - freqs[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
  }
};

struct Pmf {
  std::vector<double> support;  // Hz, ascending
  std::vector<double> mass;

  void validate() const {
    if (support.empty() || support.size() != mass.size()) throw InvalidParameter("pmf: bad shape");
    double total = 0.0;
    for (std::size_t k = 0; k < mass.size(); ++k) {
      if (!(mass[k] >= 0.0)) throw InvalidParameter("pmf: negative or NaN mass");
      if (k > 0 && !(support[k] > support[k - 1])) throw InvalidParameter("pmf: support must be ascending");
      total += mass[k];
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidParameter("pmf: mass does not sum to 1");
  }
};

inline std::vector<RawCutoffPair> init_uniform(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw InvalidParameter("init_uniform: need at least one filter");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<RawCutoffPair> out(n);
  for (auto& p : out) {
    p.a1_raw = unit(rng);
    p.a2_raw = unit(rng);
  }
  return out;
}

/// Interpolates the curve onto n_bins uniform frequencies over [0, fs/2] and normalizes.
inline Pmf cfr_to_pmf(const TabulatedCurve& curve, std::size_t n_bins, double sample_rate = kDefaultSampleRate) {
  curve.validate();
  if (n_bins < 2) throw InvalidParameter("cfr_to_pmf: need at least 2 bins");
  if (!(sample_rate > 0.0)) throw InvalidParameter("cfr_to_pmf: sample rate must be positive");
  const double nyquist = sample_rate / 2.0;
  Pmf pmf;
  pmf.support.resize(n_bins);
  pmf.mass.resize(n_bins);
  double total = 0.0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    pmf.support[k] = nyquist * static_cast<double>(k) / static_cast<double>(n_bins - 1);
    pmf.mass[k] = curve.at(pmf.support[k]);
    total += pmf.mass[k];
  }
  if (!(total > 0.0)) throw InvalidParameter("cfr_to_pmf: curve is zero over [0, fs/2]");
  for (double& m : pmf.mass) m /= total;
  return pmf;
}

/// Each cutoff of a pair is an independent inverse-CDF draw from the PMF; pairs are sorted.
inline std::vector<RawCutoffPair> init_formant(std::size_t n, const Pmf& pmf, std::uint64_t seed,
                                               double sample_rate = kDefaultSampleRate) {
  if (n == 0) throw InvalidParameter("init_formant: need at least one filter");
  pmf.validate();
  std::vector<double> cdf(pmf.mass.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < cdf.size(); ++k) cdf[k] = acc += pmf.mass[k];

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double nyquist = sample_rate / 2.0;
  auto draw = [&] {
    const double u = unit(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    return pmf.support[static_cast<std::size_t>(it - cdf.begin())] / nyquist;
  };

  std::vector<RawCutoffPair> out(n);
  for (auto& p : out) {
    const double f1 = draw();
    const double f2 = draw();
    p = {std::min(f1, f2), std::max(f1, f2)};
  }
  return out;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// N+1 band edges in Hz, equally spaced in mel from f_min to fs/2. End points are exact.
inline std::vector<double> mel_edges_hz(std::size_t n, double sample_rate, double f_min) {
  if (n == 0) throw InvalidParameter("mel edges: need at least one band");
  const double nyquist = sample_rate / 2.0;
  if (!(f_min >= 0.0) || !(f_min < nyquist)) throw InvalidParameter("mel edges: need 0 <= f_min < fs/2");
  const double lo = hz_to_mel(f_min);
  const double hi = hz_to_mel(nyquist);
  std::vector<double> edges(n + 1);
  edges.front() = f_min;
  edges.back() = nyquist;
  for (std::size_t k = 1; k < n; ++k) {
    edges[k] = mel_to_hz(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n));
  }
  return edges;
}

inline std::vector<RawCutoffPair> init_mel(std::size_t n, double sample_rate = kDefaultSampleRate,
                                           double f_min = 0.0) {
  const auto edges = mel_edges_hz(n, sample_rate, f_min);
  const double nyquist = sample_rate / 2.0;
  std::vector<RawCutoffPair> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {edges[i] / nyquist, edges[i + 1] / nyquist};
  return out;
}

/// Synthetic formant-like curve with peaks near 500, 1500 and 2500 Hz over a small floor.
/// Test fixture only: it is not a curve learned from speech.
inline TabulatedCurve synthetic_formant_curve(double sample_rate = kDefaultSampleRate, std::size_t points = 257) {
  TabulatedCurve c;
  const double nyquist = sample_rate / 2.0;
  constexpr double peaks[] = {500.0, 1500.0, 2500.0};
  constexpr double heights[] = {1.0, 0.7, 0.45};
  constexpr double width = 180.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double f = nyquist * static_cast<double>(k) / static_cast<double>(points - 1);
    double v = 0.02;
    for (int p = 0; p < 3; ++p) v += heights[p] * std::exp(-0.5 * std::pow((f - peaks[p]) / width, 2));
    c.freqs.push_back(f);
    c.values.push_back(v);
  }
  return c;
}

}  // namespace sincfb
