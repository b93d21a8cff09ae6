#pragma once

// Synthetic denoising data: a few sinusoids buried in band-limited Gaussian noise.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "filter_core.hpp"
#include "si_snr.hpp"

namespace sincfb {

/// Length of the windowed-sinc prototype used to shape the noise and for the band-stop oracle.
inline constexpr int kReferenceKernelLen = 1001;

struct SynthSpec {
  std::vector<double> tone_freqs{400.0, 700.0};
  std::vector<double> tone_amps{0.1, 0.08};
  double noise_low_hz = 3000.0;
  double noise_high_hz = 5000.0;
  double input_snr_db = 0.0;
  std::size_t duration = 2048;
  std::uint64_t seed = 1;
  double sample_rate = kDefaultSampleRate;

  void validate() const {
    const double nyquist = sample_rate / 2.0;
    if (!(sample_rate > 0.0)) throw InvalidParameter("synth: sample rate must be positive");
    if (tone_freqs.empty() || tone_freqs.size() != tone_amps.size())
      throw InvalidParameter("synth: need one amplitude per tone and at least one tone");
    for (double f : tone_freqs)
      if (!(f > 0.0 && f < nyquist)) throw InvalidParameter("synth: tone frequency outside (0, fs/2)");
    if (!(noise_low_hz > 0.0 && noise_low_hz < noise_high_hz && noise_high_hz < nyquist))
      throw InvalidParameter("synth: noise band must satisfy 0 < low < high < fs/2");
    if (!std::isfinite(input_snr_db)) throw InvalidParameter("synth: input SNR must be finite");
    if (duration < 2) throw InvalidParameter("synth: duration too short");
  }
};

struct SignalPair {
  std::vector<double> noisy;
  std::vector<double> clean;
};

namespace detail {

/// Valid convolution: out[n] = sum_k h[k] x[n + L-1-k], length x.size() - L + 1.
inline std::vector<double> convolve_valid(std::span<const double> x, std::span<const double> h) {
  const std::size_t length = h.size();
  std::vector<double> out(x.size() - length + 1, 0.0);
  for (std::size_t k = 0; k < length; ++k) {
    const double c = h[k];
    const double* src = x.data() + (length - 1 - k);
    for (std::size_t n = 0; n < out.size(); ++n) out[n] += c * src[n];
  }
  return out;
}

inline std::vector<double> reference_bandpass(double low_hz, double high_hz, double sample_rate) {
  const double nyquist = sample_rate / 2.0;
  return assemble_filter({low_hz / nyquist, high_hz / nyquist}, 1.0, kReferenceKernelLen, Mode::reformed).taps;
}

inline std::vector<double> mix(std::span<const double> clean, std::span<const double> noise, double gain) {
  std::vector<double> out(clean.begin(), clean.end());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] += gain * noise[n];
  return out;
}

}  // namespace detail

/// Pair number `index` of stream `stream`; fully determined by (spec, stream, index).
inline SignalPair synth_pair(const SynthSpec& spec, std::uint64_t stream, std::uint64_t index) {
  spec.validate();
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SignalPair pair;
  pair.clean.assign(spec.duration, 0.0);
  for (std::size_t k = 0; k < spec.tone_freqs.size(); ++k) {
    const double w = 2.0 * kPi * spec.tone_freqs[k] / spec.sample_rate;
    const double ph = phase(rng);
    for (std::size_t n = 0; n < spec.duration; ++n)
      pair.clean[n] += spec.tone_amps[k] * std::sin(w * static_cast<double>(n) + ph);
  }

  const auto shaping = detail::reference_bandpass(spec.noise_low_hz, spec.noise_high_hz, spec.sample_rate);
  std::vector<double> white(spec.duration + shaping.size() - 1);
  for (double& v : white) v = gauss(rng);
  const auto noise = detail::convolve_valid(white, shaping);

  // SI-SNR of clean + g*noise falls monotonically in g over the bracket; bisect in log g.
  double lo = -30.0, hi = 30.0;
  auto snr_at = [&](double log_gain) { return si_snr(detail::mix(pair.clean, noise, std::exp(log_gain)), pair.clean); };
  if (!(snr_at(lo) > spec.input_snr_db && snr_at(hi) < spec.input_snr_db))
    throw InvalidParameter("synth: requested input SNR is not reachable");
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (snr_at(mid) > spec.input_snr_db ? lo : hi) = mid;
  }
  pair.noisy = detail::mix(pair.clean, noise, std::exp(0.5 * (lo + hi)));
  return pair;
}

inline constexpr std::uint64_t kTrainStream = 0;
inline constexpr std::uint64_t kValidationStream = 1;

inline std::vector<SignalPair> synth_dataset(const SynthSpec& spec, std::size_t count) {
  std::vector<SignalPair> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(synth_pair(spec, kTrainStream, k));
  return out;
}

inline SignalPair validation_pair(const SynthSpec& spec) { return synth_pair(spec, kValidationStream, 0); }

/// Zero-phase band-stop over the noise band (L = 1001 Hamming windowed sinc) applied to the
/// validation mixture. Returns SI-SNR(filtered) - SI-SNR(noisy), both measured on the span
/// where the filter has full support.
inline double oracle_bandstop_baseline(const SynthSpec& spec) {
  spec.validate();
  const auto pair = validation_pair(spec);
  const auto bandpass = detail::reference_bandpass(spec.noise_low_hz, spec.noise_high_hz, spec.sample_rate);
  auto bandstop = bandpass;
  for (double& v : bandstop) v = -v;
  const std::size_t half = bandstop.size() / 2;
  bandstop[half] += 1.0;
  if (spec.duration < bandstop.size() + 2) throw InvalidParameter("oracle: duration shorter than the band-stop kernel");

  const auto filtered = detail::convolve_valid(pair.noisy, bandstop);  // aligned with noisy[half ...]
  const std::span<const double> clean(pair.clean);
  const std::span<const double> noisy(pair.noisy);
  const auto ref = clean.subspan(half, filtered.size());
  return si_snr(filtered, ref) - si_snr(noisy.subspan(half, filtered.size()), ref);
}

}  // namespace sincfb
