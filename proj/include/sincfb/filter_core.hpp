#pragma once

// Windowed-sinc band-pass filters built from trainable cutoff parameters.
//
// Frequencies are Nyquist-normalized: a cutoff a in [0, 1] is the digital angular
// frequency a*pi rad/sample, or a*fs/2 Hz.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace sincfb {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kDefaultSampleRate = 16000.0;

/// How raw trainable values map onto cutoffs.
///   reformed: raw values are Nyquist-normalized, passed through abs/min/max and clamped at 1.
///   original: raw values are absolute frequencies in Hz, only abs + ordering applied.
enum class Mode { reformed, original };

inline std::string_view to_string(Mode m) { return m == Mode::reformed ? "reformed" : "original"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "reformed") return Mode::reformed;
  if (s == "original") return Mode::original;
  throw InvalidParameter("unknown parametrization mode: " + std::string(s));
}

struct RawCutoffPair {
  double a1_raw = 0.0;
  double a2_raw = 0.0;

  friend bool operator==(const RawCutoffPair&, const RawCutoffPair&) = default;
};

/// Ordered cutoff pair as a fraction of Nyquist. In reformed mode 0 <= a1 <= a2 <= 1;
/// original mode may exceed 1.
struct NormalizedBand {
  double a1 = 0.0;
  double a2 = 0.0;

  double low_hz(double sample_rate) const { return a1 * sample_rate / 2.0; }
  double high_hz(double sample_rate) const { return a2 * sample_rate / 2.0; }

  friend bool operator==(const NormalizedBand&, const NormalizedBand&) = default;
};

inline void check_kernel_length(int length) {
  if (length < 3 || length % 2 == 0) {
    throw InvalidParameter("kernel length must be odd and >= 3, got " + std::to_string(length));
  }
}

/// Unnormalized sinc, sin(x)/x with sinc(0) = 1.
inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }

inline NormalizedBand normalize_cutoffs(const RawCutoffPair& raw) {
  if (!std::isfinite(raw.a1_raw) || !std::isfinite(raw.a2_raw)) {
    throw InvalidParameter("normalize_cutoffs: raw cutoffs must be finite");
  }
  const double m1 = std::abs(raw.a1_raw);
  const double m2 = std::abs(raw.a2_raw);
  return {std::min(std::min(m1, m2), 1.0), std::min(std::max(m1, m2), 1.0)};
}

/// Original-mode mapping: |raw| in Hz divided by Nyquist, ordered, never clamped.
inline NormalizedBand original_band(const RawCutoffPair& raw, double sample_rate) {
  if (!std::isfinite(raw.a1_raw) || !std::isfinite(raw.a2_raw)) {
    throw InvalidParameter("original_band: raw cutoffs must be finite");
  }
  const double nyquist = sample_rate / 2.0;
  const double m1 = std::abs(raw.a1_raw) / nyquist;
  const double m2 = std::abs(raw.a2_raw) / nyquist;
  return {std::min(m1, m2), std::max(m1, m2)};
}

inline NormalizedBand band_for(const RawCutoffPair& raw, Mode mode, double sample_rate) {
  return mode == Mode::reformed ? normalize_cutoffs(raw) : original_band(raw, sample_rate);
}

/// Truncated, delayed ideal band-pass response of odd length L centered at M = (L-1)/2.
/// Built for n <= M and mirrored, so the result is exactly symmetric.
inline std::vector<double> ideal_band_taps(const NormalizedBand& band, int length) {
  check_kernel_length(length);
  const int center = (length - 1) / 2;
  const double w1 = band.a1 * kPi;
  const double w2 = band.a2 * kPi;
  std::vector<double> taps(static_cast<std::size_t>(length));
  taps[center] = band.a2 - band.a1;
  for (int k = 1; k <= center; ++k) {
    const double d = static_cast<double>(k);
    const double v = std::sin(w2 * d) / (kPi * d) - std::sin(w1 * d) / (kPi * d);
    taps[center + k] = v;
    taps[center - k] = v;
  }
  return taps;
}

/// Symmetric Hamming window, 0.54 - 0.46 cos(2 pi n / (L-1)).
inline std::vector<double> hamming_window(int length) {
  check_kernel_length(length);
  const int center = (length - 1) / 2;
  std::vector<double> w(static_cast<std::size_t>(length));
  for (int n = 0; n <= center; ++n) {
    const double v = 0.54 - 0.46 * std::cos(kPi * (2.0 * n / (length - 1)));
    w[n] = v;
    w[length - 1 - n] = v;
  }
  return w;
}

struct FilterSpec {
  NormalizedBand band;
  double beta = 1.0;
  std::vector<double> taps;  // beta * ideal * window
  Mode mode = Mode::reformed;

  int kernel_len() const { return static_cast<int>(taps.size()); }
  int center() const { return kernel_len() / 2; }
};

namespace detail {

inline std::vector<double> windowed_ideal(const NormalizedBand& band, std::span<const double> window) {
  auto taps = ideal_band_taps(band, static_cast<int>(window.size()));
  for (std::size_t n = 0; n < taps.size(); ++n) taps[n] *= window[n];
  return taps;
}

}  // namespace detail

inline FilterSpec assemble_filter(const RawCutoffPair& raw, double beta, int length, Mode mode,
                                  double sample_rate = kDefaultSampleRate) {
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw InvalidParameter("assemble_filter: band gain must be finite and >= 0");
  }
  FilterSpec spec;
  spec.band = band_for(raw, mode, sample_rate);
  spec.beta = beta;
  spec.mode = mode;
  spec.taps = detail::windowed_ideal(spec.band, hamming_window(length));
  for (double& t : spec.taps) t *= beta;
  return spec;
}

/// |H(e^{jw})| on n_grid uniformly spaced frequencies from 0 to pi inclusive.
inline std::vector<double> frequency_response(std::span<const double> taps, int n_grid) {
  if (taps.empty()) throw InvalidParameter("frequency_response: empty taps");
  if (n_grid < 2) throw InvalidParameter("frequency_response: n_grid must be >= 2");
  std::vector<double> mag(static_cast<std::size_t>(n_grid));
  for (int k = 0; k < n_grid; ++k) {
    const double omega = kPi * k / (n_grid - 1);
    const std::complex<double> step = std::polar(1.0, -omega);
    std::complex<double> phasor{1.0, 0.0};
    std::complex<double> acc{0.0, 0.0};
    for (double t : taps) {
      acc += t * phasor;
      phasor *= step;
    }
    mag[k] = std::abs(acc);
  }
  return mag;
}

enum class FilterType { low_pass, high_pass, band_pass, degenerate };

inline std::string_view to_string(FilterType t) {
  switch (t) {
    case FilterType::low_pass: return "low_pass";
    case FilterType::high_pass: return "high_pass";
    case FilterType::band_pass: return "band_pass";
    case FilterType::degenerate: return "degenerate";
  }
  return "unknown";
}

inline FilterType classify_filter(const NormalizedBand& band, double eps = 0.01) {
  const bool at_dc = band.a1 < eps;
  const bool at_nyquist = band.a2 > 1.0 - eps;
  if (band.a2 - band.a1 < eps || (at_dc && at_nyquist)) return FilterType::degenerate;
  if (at_dc) return FilterType::low_pass;
  if (at_nyquist) return FilterType::high_pass;
  return FilterType::band_pass;
}

/// N assembled filters sharing one kernel length and sample rate.
/// Immutable: updating parameters means building a new bank.
class Filterbank {
 public:
  Filterbank(std::vector<RawCutoffPair> raw, std::vector<double> betas, int kernel_len,
             double sample_rate, Mode mode)
      : raw_(std::move(raw)), kernel_len_(kernel_len), sample_rate_(sample_rate), mode_(mode) {
    if (raw_.empty()) throw InvalidParameter("filterbank needs at least one filter");
    if (betas.size() != raw_.size()) throw InvalidParameter("filterbank: one band gain per filter");
    if (!(sample_rate_ > 0.0)) throw InvalidParameter("filterbank: sample rate must be positive");
    check_kernel_length(kernel_len_);
    window_ = hamming_window(kernel_len_);
    unit_taps_ = Matrix(raw_.size(), static_cast<std::size_t>(kernel_len_));
    taps_ = Matrix(raw_.size(), static_cast<std::size_t>(kernel_len_));
    filters_.reserve(raw_.size());
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      if (!(betas[i] >= 0.0) || !std::isfinite(betas[i])) {
        throw InvalidParameter("filterbank: band gain " + std::to_string(i) + " must be finite and >= 0");
      }
      FilterSpec spec;
      spec.band = band_for(raw_[i], mode_, sample_rate_);
      spec.beta = betas[i];
      spec.mode = mode_;
      auto unit = detail::windowed_ideal(spec.band, window_);
      spec.taps = unit;
      for (double& t : spec.taps) t *= spec.beta;
      std::copy(unit.begin(), unit.end(), unit_taps_.row(i).begin());
      std::copy(spec.taps.begin(), spec.taps.end(), taps_.row(i).begin());
      filters_.push_back(std::move(spec));
    }
  }

  /// Uniform band gain 1.
  Filterbank(std::vector<RawCutoffPair> raw, int kernel_len, double sample_rate, Mode mode)
      : Filterbank(raw, std::vector<double>(raw.size(), 1.0), kernel_len, sample_rate, mode) {}

  std::size_t size() const { return filters_.size(); }
  int kernel_len() const { return kernel_len_; }
  int center() const { return (kernel_len_ - 1) / 2; }
  double sample_rate() const { return sample_rate_; }
  Mode mode() const { return mode_; }

  const std::vector<FilterSpec>& filters() const { return filters_; }
  const FilterSpec& filter(std::size_t i) const { return filters_.at(i); }
  const std::vector<RawCutoffPair>& raw_params() const { return raw_; }
  std::vector<double> betas() const {
    std::vector<double> b;
    b.reserve(filters_.size());
    for (const auto& f : filters_) b.push_back(f.beta);
    return b;
  }
  std::vector<NormalizedBand> bands() const {
    std::vector<NormalizedBand> b;
    b.reserve(filters_.size());
    for (const auto& f : filters_) b.push_back(f.band);
    return b;
  }

  const std::vector<double>& window() const { return window_; }
  /// N x L assembled taps (band gain included).
  const Matrix& taps() const { return taps_; }
  /// N x L windowed ideal taps with unit band gain.
  const Matrix& unit_gain_taps() const { return unit_taps_; }

  Filterbank with_parameters(std::vector<RawCutoffPair> raw, std::vector<double> betas) const {
    return Filterbank(std::move(raw), std::move(betas), kernel_len_, sample_rate_, mode_);
  }

 private:
  std::vector<RawCutoffPair> raw_;
  int kernel_len_;
  double sample_rate_;
  Mode mode_;
  std::vector<double> window_;
  std::vector<FilterSpec> filters_;
  Matrix unit_taps_;
  Matrix taps_;
};

}  // namespace sincfb
