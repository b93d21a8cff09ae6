#pragma once

// Interpretability views of a trained bank: cumulative frequency response, filter-type
// census, and cutoff/band-gain tables.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "filter_core.hpp"

namespace sincfb {

inline constexpr int kDefaultCfrGrid = 2048;
inline constexpr double kZeroGainThreshold = 1e-6;

struct CfrCurve {
  std::vector<double> freqs;      // Hz, uniform over [0, fs/2]
  std::vector<double> magnitude;  // summed linear magnitude
};

/// Pointwise sum of |H_i| over every filter of the bank.
inline CfrCurve cumulative_frequency_response(const Filterbank& fb, int n_grid = kDefaultCfrGrid) {
  if (n_grid < 16) throw InvalidParameter("cfr: grid must have at least 16 points");
  CfrCurve c;
  c.freqs.resize(static_cast<std::size_t>(n_grid));
  c.magnitude.assign(static_cast<std::size_t>(n_grid), 0.0);
  const double nyquist = fb.sample_rate() / 2.0;
  for (int k = 0; k < n_grid; ++k) c.freqs[k] = nyquist * k / (n_grid - 1);
  for (const auto& f : fb.filters()) {
    const auto mag = frequency_response(f.taps, n_grid);
    for (int k = 0; k < n_grid; ++k) c.magnitude[k] += mag[k];
  }
  return c;
}

struct FilterCensus {
  std::size_t low_pass = 0;
  std::size_t high_pass = 0;
  std::size_t band_pass = 0;
  std::size_t degenerate = 0;
  std::size_t zero_gain = 0;  // beta below kZeroGainThreshold, counted independently of type

  std::size_t total() const { return low_pass + high_pass + band_pass + degenerate; }
};

inline FilterCensus filter_census(const Filterbank& fb, double eps = 0.01) {
  FilterCensus c;
  for (const auto& f : fb.filters()) {
    switch (classify_filter(f.band, eps)) {
      case FilterType::low_pass: ++c.low_pass; break;
      case FilterType::high_pass: ++c.high_pass; break;
      case FilterType::band_pass: ++c.band_pass; break;
      case FilterType::degenerate: ++c.degenerate; break;
    }
    if (f.beta < kZeroGainThreshold) ++c.zero_gain;
  }
  return c;
}

enum class CutoffSortKey { lower, upper };

struct CutoffRow {
  std::size_t index = 0;
  double f_low_hz = 0.0;
  double f_high_hz = 0.0;
  double beta = 0.0;
};

/// One row per filter sorted ascending by the chosen edge; ties keep filter-index order.
inline std::vector<CutoffRow> export_cutoffs_and_gains(const Filterbank& fb, CutoffSortKey key) {
  std::vector<CutoffRow> rows;
  rows.reserve(fb.size());
  for (std::size_t i = 0; i < fb.size(); ++i) {
    const auto& f = fb.filter(i);
    rows.push_back({i, f.band.low_hz(fb.sample_rate()), f.band.high_hz(fb.sample_rate()), f.beta});
  }
  std::stable_sort(rows.begin(), rows.end(), [key](const CutoffRow& a, const CutoffRow& b) {
    return key == CutoffSortKey::lower ? a.f_low_hz < b.f_low_hz : a.f_high_hz < b.f_high_hz;
  });
  return rows;
}

}  // namespace sincfb
