#pragma once

// Reverse-mode gradients of the negative SI-SNR loss for every trainable parameter, written
// out stage by stage: loss -> decoder -> mask -> normalization -> convolution -> taps ->
// cutoffs -> clamp -> raw values. The finite-difference check at the bottom is the oracle.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "filter_core.hpp"
#include "matrix.hpp"
#include "pipeline.hpp"
#include "si_snr.hpp"

namespace sincfb {

struct CutoffGradient {
  double d_a1 = 0.0;
  double d_a2 = 0.0;
};

struct GradientSet {
  std::vector<CutoffGradient> d_raw;
  std::vector<double> d_beta;
  std::vector<double> d_theta;
  std::vector<double> d_gamma;  // linear-combination decoder only
  Matrix d_synth;               // transposed decoder only
};

struct TapCutoffGradient {
  std::vector<double> d_a1;
  std::vector<double> d_a2;
};

/// d(ideal tap n)/d(a1) = -cos(a1 pi (n-M)) and d/d(a2) = cos(a2 pi (n-M)).
inline TapCutoffGradient taps_grad_wrt_cutoff(const NormalizedBand& band, int length) {
  check_kernel_length(length);
  const int center = (length - 1) / 2;
  TapCutoffGradient g{std::vector<double>(length), std::vector<double>(length)};
  for (int n = 0; n < length; ++n) {
    const double d = static_cast<double>(n - center);
    g.d_a1[n] = -std::cos(band.a1 * kPi * d);
    g.d_a2[n] = std::cos(band.a2 * kPi * d);
  }
  return g;
}

namespace detail {

inline double sign_or_zero(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

/// Routes (dL/da1, dL/da2) back through a1 = min(min|r1|,|r2|), 1), a2 = min(max(...), 1).
/// Ties go to r1; saturated inputs (|r| >= 1) and r = 0 receive zero.
inline CutoffGradient clamp_backward(const RawCutoffPair& raw, const CutoffGradient& upstream) {
  const double m1 = std::abs(raw.a1_raw);
  const double m2 = std::abs(raw.a2_raw);
  const bool min_from_first = m1 <= m2;
  const bool max_from_first = m1 >= m2;
  double g1 = 0.0, g2 = 0.0;
  auto route = [&](bool to_first, double grad) {
    const double r = to_first ? raw.a1_raw : raw.a2_raw;
    if (std::abs(r) >= 1.0) return;
    (to_first ? g1 : g2) += grad * detail::sign_or_zero(r);
  };
  route(min_from_first, upstream.d_a1);
  route(max_from_first, upstream.d_a2);
  return {g1, g2};
}

/// Same routing for original mode, where a = |raw| / (fs/2) with no clamp.
inline CutoffGradient original_backward(const RawCutoffPair& raw, const CutoffGradient& upstream,
                                        double sample_rate) {
  const double m1 = std::abs(raw.a1_raw);
  const double m2 = std::abs(raw.a2_raw);
  const double scale = 2.0 / sample_rate;
  double g1 = 0.0, g2 = 0.0;
  auto route = [&](bool to_first, double grad) {
    const double r = to_first ? raw.a1_raw : raw.a2_raw;
    (to_first ? g1 : g2) += grad * detail::sign_or_zero(r) * scale;
  };
  route(m1 <= m2, upstream.d_a1);
  route(m1 >= m2, upstream.d_a2);
  return {g1, g2};
}

/// SI-SNR between the decoder output and the reference over their aligned span.
inline double evaluate_si_snr(const EnhancementModel& m, std::span<const double> output,
                              std::span<const double> reference) {
  if (output.size() != reference.size()) throw InvalidParameter("evaluate_si_snr: length mismatch");
  const auto al = output_alignment(m.decoder_variant(), m.bank.kernel_len(), output.size());
  return si_snr(output.subspan(al.out_begin, al.length), reference.subspan(al.ref_begin, al.length));
}

/// Negative aligned SI-SNR of the model's output against `target`.
inline double loss(const EnhancementModel& m, std::span<const double> x, std::span<const double> target) {
  if (x.size() != target.size()) throw InvalidParameter("loss: input/target length mismatch");
  const auto out = enhance(m, x);
  return -evaluate_si_snr(m, out, target);
}

namespace detail {

inline void require_finite(std::span<const double> v, const char* stage) {
  for (double s : v) {
    if (!std::isfinite(s)) throw NumericFailure(std::string("non-finite value in ") + stage);
  }
}

}  // namespace detail

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
};

/// Loss and gradient for one (input, target) pair. The pseudo-inverse decoder is treated as a
/// frozen linear map: gradients reach the encoder through the features only.
inline BackwardResult backward(const EnhancementModel& m, std::span<const double> x, std::span<const double> target) {
  if (x.size() != target.size()) throw InvalidParameter("backward: input/target length mismatch");
  const std::size_t n = m.bank.size();
  const std::size_t length = static_cast<std::size_t>(m.bank.kernel_len());
  const PipelineTrace tr = forward_trace(m, x);
  detail::require_finite(tr.output, "decoder output");

  const std::size_t frames = tr.masked.frames();
  const std::size_t hop = tr.masked.hop;

  BackwardResult res;
  GradientSet& g = res.grads;
  g.d_raw.assign(n, {});
  g.d_beta.assign(n, 0.0);
  g.d_theta.assign(n, 0.0);

  // loss = -si_snr(aligned output, aligned target)
  const auto al = output_alignment(m.decoder_variant(), m.bank.kernel_len(), x.size());
  const std::span<const double> out_span(tr.output);
  const auto sg = si_snr_with_gradient(out_span.subspan(al.out_begin, al.length), target.subspan(al.ref_begin, al.length));
  res.loss = -sg.value;
  if (!std::isfinite(res.loss)) throw NumericFailure("non-finite value in loss");
  std::vector<double> d_out(tr.output.size(), 0.0);
  for (std::size_t k = 0; k < al.length; ++k) d_out[al.out_begin + k] = -sg.d_est[k];

  // decoder
  Matrix d_masked(n, frames);
  switch (m.decoder_variant()) {
    case DecoderVariant::transposed: {
      const Matrix& synth = std::get<TransposedDecoder>(m.decoder).synth_taps;
      g.d_synth = Matrix(n, length);
      for (std::size_t i = 0; i < n; ++i) {
        const double* s = synth.row(i).data();
        double* ds = g.d_synth.row(i).data();
        for (std::size_t t = 0; t < frames; ++t) {
          const double* go = d_out.data() + t * hop;
          d_masked(i, t) = detail::dot(s, go, length);
          const double a = tr.masked.data(i, t);
          for (std::size_t k = 0; k < length; ++k) ds[k] += a * go[k];
        }
      }
      detail::require_finite(g.d_synth.values(), "decoder backward");
      break;
    }
    case DecoderVariant::linear_combination: {
      const auto& gamma = std::get<LinearCombinationDecoder>(m.decoder).gamma;
      const auto p = softmax(gamma);
      const double* go = d_out.data() + (length - 1);
      std::vector<double> dp(n);
      double weighted = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        dp[i] = detail::dot(tr.masked.data.row(i).data(), go, frames);
        weighted += p[i] * dp[i];
        for (std::size_t t = 0; t < frames; ++t) d_masked(i, t) = p[i] * go[t];
      }
      g.d_gamma.resize(n);
      for (std::size_t i = 0; i < n; ++i) g.d_gamma[i] = p[i] * (dp[i] - weighted);
      detail::require_finite(g.d_gamma, "decoder backward");
      break;
    }
    case DecoderVariant::pseudo_inverse: {
      const auto count = frame_coverage(tr.masked);
      std::vector<double> scaled(d_out.size(), 0.0);
      for (std::size_t k = 0; k < d_out.size(); ++k)
        if (count[k] > 0.0) scaled[k] = d_out[k] / count[k];
      for (std::size_t t = 0; t < frames; ++t) {
        const double* go = scaled.data() + t * hop;
        for (std::size_t i = 0; i < n; ++i) {
          double acc = 0.0;
          for (std::size_t k = 0; k < length; ++k) acc += tr.pinv(k, i) * go[k];
          d_masked(i, t) = acc;
        }
      }
      break;
    }
  }
  detail::require_finite(d_masked.values(), "decoder backward");

  // mask
  Matrix d_shaped(n, frames);
  for (std::size_t i = 0; i < n; ++i) {
    const double mval = tr.mask.data(i, 0);
    const double dm = detail::dot(tr.shaped.data.row(i).data(), d_masked.row(i).data(), frames);
    g.d_theta[i] = dm * mval * (1.0 - mval);
    for (std::size_t t = 0; t < frames; ++t) d_shaped(i, t) = mval * d_masked(i, t);
  }
  detail::require_finite(g.d_theta, "mask backward");

  // normalization (band gain applied after it) or pass-through
  Matrix d_features(n, frames);
  if (m.config.normalize) {
    const double eps = m.config.norm_eps;
    const double tf = static_cast<double>(frames);
    std::vector<double> v(frames), dv(frames);
    for (std::size_t i = 0; i < n; ++i) {
      const RowMoments mo = row_moments(tr.features.data.row(i));
      const double q = mo.stddev + eps;
      const double beta = m.bank.filter(i).beta;
      double dbeta = 0.0, dq = 0.0, dv_mean = 0.0;
      for (std::size_t t = 0; t < frames; ++t) {
        v[t] = tr.features.data(i, t) - mo.mean;
        const double nrm = v[t] / q;
        dbeta += d_shaped(i, t) * nrm;
        const double dnrm = beta * d_shaped(i, t);
        dv[t] = dnrm / q;
        dq -= dnrm * v[t] / (q * q);
        dv_mean += dv[t];
      }
      dv_mean /= tf;
      g.d_beta[i] = dbeta;
      const double dstd = mo.stddev > 0.0 ? dq / (tf * mo.stddev) : 0.0;
      for (std::size_t t = 0; t < frames; ++t) d_features(i, t) = dv[t] - dv_mean + dstd * v[t];
    }
    detail::require_finite(d_features.values(), "normalization backward");
  } else {
    d_features = d_shaped;
  }

  // convolution: features[i][t] = sum_l x[t*hop + L-1-l] K[i][l]
  const Matrix& unit = m.bank.unit_gain_taps();
  const auto& window = m.bank.window();
  const int center = m.bank.center();
  std::vector<double> d_kernel(length), d_ideal(length), xs(frames);
  for (std::size_t i = 0; i < n; ++i) {
    const double* du = d_features.row(i).data();
    for (std::size_t l = 0; l < length; ++l) {
      const double* src = x.data() + (length - 1 - l);
      if (hop == 1) {
        d_kernel[l] = detail::dot(du, src, frames);
      } else {
        for (std::size_t t = 0; t < frames; ++t) xs[t] = src[t * hop];
        d_kernel[l] = detail::dot(du, xs.data(), frames);
      }
    }
    const FilterSpec& f = m.bank.filter(i);
    const double kernel_gain = m.config.normalize ? 1.0 : f.beta;
    if (!m.config.normalize) g.d_beta[i] = detail::dot(d_kernel.data(), unit.row(i).data(), length);
    for (std::size_t l = 0; l < length; ++l) d_ideal[l] = kernel_gain * window[l] * d_kernel[l];

    CutoffGradient d_band;
    for (std::size_t l = 0; l < length; ++l) {
      const double d = static_cast<double>(static_cast<int>(l) - center);
      d_band.d_a2 += d_ideal[l] * std::cos(f.band.a2 * kPi * d);
      d_band.d_a1 -= d_ideal[l] * std::cos(f.band.a1 * kPi * d);
    }
    const RawCutoffPair& raw = m.bank.raw_params()[i];
    g.d_raw[i] = m.bank.mode() == Mode::reformed ? clamp_backward(raw, d_band)
                                                 : original_backward(raw, d_band, m.bank.sample_rate());
  }
  detail::require_finite(g.d_beta, "band gain backward");
  for (const auto& d : g.d_raw) {
    if (!std::isfinite(d.d_a1) || !std::isfinite(d.d_a2)) throw NumericFailure("non-finite value in cutoff backward");
  }
  return res;
}

// ---------------------------------------------------------------------------------------------
// Flat parameter view, shared by the optimizer and the finite-difference oracle.
// Order: raw cutoffs (a1, a2 per filter), band gains, mask logits, then decoder parameters.

inline std::vector<double> pack_parameters(const EnhancementModel& m) {
  std::vector<double> p;
  for (const auto& r : m.bank.raw_params()) {
    p.push_back(r.a1_raw);
    p.push_back(r.a2_raw);
  }
  for (const auto& f : m.bank.filters()) p.push_back(f.beta);
  p.insert(p.end(), m.mask_logits.begin(), m.mask_logits.end());
  if (const auto* lc = std::get_if<LinearCombinationDecoder>(&m.decoder)) {
    p.insert(p.end(), lc->gamma.begin(), lc->gamma.end());
  } else if (const auto* tc = std::get_if<TransposedDecoder>(&m.decoder)) {
    p.insert(p.end(), tc->synth_taps.values().begin(), tc->synth_taps.values().end());
  }
  return p;
}

inline std::vector<double> pack_gradients(const EnhancementModel& m, const GradientSet& g) {
  std::vector<double> p;
  for (const auto& d : g.d_raw) {
    p.push_back(d.d_a1);
    p.push_back(d.d_a2);
  }
  p.insert(p.end(), g.d_beta.begin(), g.d_beta.end());
  p.insert(p.end(), g.d_theta.begin(), g.d_theta.end());
  if (m.decoder_variant() == DecoderVariant::linear_combination) {
    p.insert(p.end(), g.d_gamma.begin(), g.d_gamma.end());
  } else if (m.decoder_variant() == DecoderVariant::transposed) {
    p.insert(p.end(), g.d_synth.values().begin(), g.d_synth.values().end());
  }
  return p;
}

/// Inverse of pack_parameters. Band gains must already be >= 0.
inline EnhancementModel unpack_parameters(const EnhancementModel& like, std::span<const double> p) {
  const std::size_t n = like.bank.size();
  if (p.size() != pack_parameters(like).size()) throw InvalidParameter("unpack_parameters: size mismatch");
  std::vector<RawCutoffPair> raw(n);
  std::vector<double> betas(n), theta(n);
  std::size_t k = 0;
  for (auto& r : raw) {
    r.a1_raw = p[k++];
    r.a2_raw = p[k++];
  }
  for (auto& b : betas) b = p[k++];
  for (auto& t : theta) t = p[k++];
  EnhancementModel out{like.bank.with_parameters(std::move(raw), std::move(betas)), std::move(theta), like.decoder,
                       like.config};
  if (auto* lc = std::get_if<LinearCombinationDecoder>(&out.decoder)) {
    for (auto& v : lc->gamma) v = p[k++];
  } else if (auto* tc = std::get_if<TransposedDecoder>(&out.decoder)) {
    for (auto& v : tc->synth_taps.values()) v = p[k++];
  }
  return out;
}

inline std::string parameter_name(const EnhancementModel& m, std::size_t index) {
  const std::size_t n = m.bank.size();
  if (index < 2 * n) return "raw[" + std::to_string(index / 2) + "]." + (index % 2 == 0 ? "a1" : "a2");
  index -= 2 * n;
  if (index < n) return "beta[" + std::to_string(index) + "]";
  index -= n;
  if (index < n) return "theta[" + std::to_string(index) + "]";
  index -= n;
  if (m.decoder_variant() == DecoderVariant::linear_combination) return "gamma[" + std::to_string(index) + "]";
  const std::size_t length = static_cast<std::size_t>(m.bank.kernel_len());
  return "synth[" + std::to_string(index / length) + "][" + std::to_string(index % length) + "]";
}

/// True when a central difference of half-width `step` at parameter `index` would straddle a
/// kink: the abs at 0, the clamp at |r| = 1, a min/max swap, or the band-gain floor at 0.
inline bool near_kink(const EnhancementModel& m, std::span<const double> p, std::size_t index, double step) {
  const std::size_t n = m.bank.size();
  if (index < 2 * n) {
    const double r = std::abs(p[index]);
    const double other = std::abs(p[index ^ 1]);
    const double unit = m.bank.mode() == Mode::reformed ? 1.0 : m.bank.sample_rate() / 2.0;
    if (r <= step || std::abs(r - other) <= step) return true;
    return m.bank.mode() == Mode::reformed && std::abs(r - unit) <= step;
  }
  if (index < 3 * n) return p[index] <= step;
  return false;
}

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Central differences for every scalar parameter against backward(). In original mode the
/// raw cutoffs are in Hz, so their step is scaled by the Nyquist frequency. Relative error uses
/// max(|analytic|, |numeric|, 1e-8) as denominator; entries where both are below 1e-8 and
/// parameters sitting on a kink are skipped.
inline FdReport finite_difference_check(const EnhancementModel& m, std::span<const double> x,
                                        std::span<const double> target, double step = 1e-5) {
  if (!(step > 0.0)) throw InvalidParameter("finite_difference_check: step must be positive");
  const auto analytic = pack_gradients(m, backward(m, x, target).grads);
  auto p = pack_parameters(m);
  FdReport rep;
  const std::size_t raw_end = 2 * m.bank.size();
  const double raw_unit = m.bank.mode() == Mode::original ? m.bank.sample_rate() / 2.0 : 1.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double h = k < raw_end ? step * raw_unit : step;
    if (near_kink(m, p, k, h)) {
      ++rep.skipped;
      continue;
    }
    const double saved = p[k];
    p[k] = saved + h;
    const double up = loss(unpack_parameters(m, p), x, target);
    p[k] = saved - h;
    const double down = loss(unpack_parameters(m, p), x, target);
    p[k] = saved;
    const double numeric = (up - down) / (2.0 * h);
    if (std::abs(analytic[k]) < 1e-8 && std::abs(numeric) < 1e-8) {
      ++rep.skipped;
      continue;
    }
    const double rel = std::abs(analytic[k] - numeric) / std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
    ++rep.checked;
    if (rel > rep.max_rel_error || rep.worst_param.empty()) {
      rep.max_rel_error = std::max(rep.max_rel_error, rel);
      rep.worst_param = parameter_name(m, k);
    }
  }
  return rep;
}

inline constexpr double kMinGradCheckBandwidth = 0.05;

/// Small random problem for gradient verification: N=4, L=31, T=200 by default.
struct GradCheckProblem {
  EnhancementModel model;
  std::vector<double> input;
  std::vector<double> target;
};

inline GradCheckProblem make_gradcheck_problem(std::uint64_t seed, DecoderVariant variant, bool normalize,
                                               Mode mode = Mode::reformed, std::size_t n = 4, int kernel_len = 31,
                                               std::size_t signal_len = 200) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> raw_dist(-1.3, 1.3);
  std::uniform_real_distribution<double> gain_dist(0.5, 1.5);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double sample_rate = kDefaultSampleRate;
  std::vector<RawCutoffPair> raw(n);
  for (auto& r : raw) {
    // redraw near-dead bands: their only gradient directions rescale the output
    do {
      r = {raw_dist(rng), raw_dist(rng)};
    } while (std::abs(std::min(std::abs(r.a1_raw), 1.0) - std::min(std::abs(r.a2_raw), 1.0)) < kMinGradCheckBandwidth);
    if (mode == Mode::original) r = {r.a1_raw * sample_rate / 2.0, r.a2_raw * sample_rate / 2.0};
  }
  std::vector<double> betas(n), theta(n);
  for (auto& b : betas) b = gain_dist(rng);
  for (auto& t : theta) t = gauss(rng);
  Filterbank bank(std::move(raw), std::move(betas), kernel_len, sample_rate, mode);

  std::size_t hop = 1;
  DecoderSpec decoder;
  switch (variant) {
    case DecoderVariant::transposed: {
      hop = std::uniform_int_distribution<std::size_t>(2, 9)(rng);
      Matrix synth(n, static_cast<std::size_t>(kernel_len));
      for (auto& v : synth.values()) v = 0.2 * gauss(rng);
      decoder = TransposedDecoder{std::move(synth)};
      break;
    }
    case DecoderVariant::linear_combination: {
      std::vector<double> gamma(n);
      for (auto& g : gamma) g = gauss(rng);
      decoder = LinearCombinationDecoder{std::move(gamma)};
      break;
    }
    case DecoderVariant::pseudo_inverse: {
      hop = std::uniform_int_distribution<std::size_t>(2, 9)(rng);
      decoder = PseudoInverseDecoder{};
      break;
    }
  }

  GradCheckProblem prob{EnhancementModel{std::move(bank), std::move(theta), std::move(decoder),
                                         PipelineConfig{hop, normalize, 1e-8}},
                        std::vector<double>(signal_len), std::vector<double>(signal_len)};
  // Target: a smoothed copy of the input plus independent noise.
  for (auto& v : prob.input) v = gauss(rng);
  for (std::size_t t = 0; t < signal_len; ++t) {
    const double prev = t > 0 ? prob.input[t - 1] : 0.0;
    prob.target[t] = 0.6 * prob.input[t] + 0.3 * prev + 0.3 * gauss(rng);
  }
  return prob;
}

}  // namespace sincfb
