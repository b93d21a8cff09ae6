#pragma once

// Masking-based enhancement chain: framed filterbank encoding, optional per-channel
// normalization, a per-band mask, and three decoders.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "filter_core.hpp"
#include "matrix.hpp"

namespace sincfb {

/// Encoder output (N x T') plus the framing metadata needed to decode back to T samples.
struct FrameMatrix {
  Matrix data;
  std::size_t hop = 1;
  int kernel_len = 0;
  std::size_t source_len = 0;

  std::size_t channels() const { return data.rows(); }
  std::size_t frames() const { return data.cols(); }
};

inline std::size_t frame_count(std::size_t signal_len, int kernel_len, std::size_t hop) {
  if (hop == 0) throw InvalidParameter("hop must be >= 1");
  if (signal_len < static_cast<std::size_t>(kernel_len)) {
    throw InvalidParameter("signal shorter than the kernel (" + std::to_string(signal_len) + " < " +
                           std::to_string(kernel_len) + ")");
  }
  return (signal_len - static_cast<std::size_t>(kernel_len)) / hop + 1;
}

/// Valid convolution of x with every row of `kernels`, sampled every `hop` samples:
/// out[i][t] = sum_l x[t*hop + L-1-l] * kernels[i][l].
inline FrameMatrix encode(std::span<const double> x, const Matrix& kernels, std::size_t hop) {
  const int length = static_cast<int>(kernels.cols());
  check_kernel_length(length);
  const std::size_t frames = frame_count(x.size(), length, hop);
  FrameMatrix fm{Matrix(kernels.rows(), frames), hop, length, x.size()};
  for (std::size_t i = 0; i < kernels.rows(); ++i) {
    double* out = fm.data.row(i).data();
    for (int l = 0; l < length; ++l) {
      const double c = kernels(i, static_cast<std::size_t>(l));
      const double* src = x.data() + (length - 1 - l);
      if (hop == 1) {
        for (std::size_t t = 0; t < frames; ++t) out[t] += c * src[t];
      } else {
        for (std::size_t t = 0; t < frames; ++t) out[t] += c * src[t * hop];
      }
    }
  }
  return fm;
}

inline FrameMatrix encode(std::span<const double> x, const Filterbank& fb, std::size_t hop) {
  return encode(x, fb.taps(), hop);
}

struct RowMoments {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline RowMoments row_moments(std::span<const double> row) {
  RowMoments m;
  for (double v : row) m.mean += v;
  m.mean /= static_cast<double>(row.size());
  double ss = 0.0;
  for (double v : row) ss += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(ss / static_cast<double>(row.size()));
  return m;
}

/// Per-channel normalization over time: (x - mean) / (std + eps), then scaled by `gains`
/// (one per channel) when given.
inline FrameMatrix layer_normalize(const FrameMatrix& fm, double eps, std::span<const double> gains = {}) {
  if (fm.frames() < 2) throw InvalidParameter("layer_normalize: need at least 2 frames");
  if (!gains.empty() && gains.size() != fm.channels()) {
    throw InvalidParameter("layer_normalize: one gain per channel");
  }
  FrameMatrix out = fm;
  for (std::size_t i = 0; i < fm.channels(); ++i) {
    const RowMoments m = row_moments(fm.data.row(i));
    const double scale = gains.empty() ? 1.0 : gains[i];
    auto dst = out.data.row(i);
    for (double& v : dst) v = scale * ((v - m.mean) / (m.stddev + eps));
  }
  return out;
}

struct Mask {
  Matrix data;
};

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Time-invariant per-band mask sigmoid(theta_i), broadcast over frames.
inline Mask estimate_mask(const FrameMatrix& fm, std::span<const double> theta) {
  if (theta.size() != fm.channels()) throw InvalidParameter("estimate_mask: one logit per channel");
  Mask m{Matrix(fm.channels(), fm.frames())};
  for (std::size_t i = 0; i < fm.channels(); ++i) {
    const double v = sigmoid(theta[i]);
    for (double& e : m.data.row(i)) e = v;
  }
  return m;
}

inline FrameMatrix apply_mask(const FrameMatrix& fm, const Mask& m) {
  if (!fm.data.same_shape(m.data)) throw InvalidParameter("apply_mask: shape mismatch");
  FrameMatrix out = fm;
  auto& v = out.data.values();
  const auto& w = m.data.values();
  for (std::size_t k = 0; k < v.size(); ++k) v[k] *= w[k];
  return out;
}

// ---------------------------------------------------------------------------------------------
// Decoders

enum class DecoderVariant { transposed, linear_combination, pseudo_inverse };

inline std::string_view to_string(DecoderVariant v) {
  switch (v) {
    case DecoderVariant::transposed: return "transposed";
    case DecoderVariant::linear_combination: return "linear_combination";
    case DecoderVariant::pseudo_inverse: return "pseudo_inverse";
  }
  return "unknown";
}

inline DecoderVariant parse_decoder_variant(std::string_view s) {
  if (s == "transposed") return DecoderVariant::transposed;
  if (s == "linear_combination" || s == "lc") return DecoderVariant::linear_combination;
  if (s == "pseudo_inverse" || s == "pinv") return DecoderVariant::pseudo_inverse;
  throw InvalidParameter("unknown decoder variant: " + std::string(s));
}

/// Learnable synthesis filters, N x L, overlap-added at the encoder hop.
struct TransposedDecoder {
  Matrix synth_taps;
};

/// Channel merge with weights softmax(gamma).
struct LinearCombinationDecoder {
  std::vector<double> gamma;
};

/// Frame-wise Moore-Penrose inverse of the encoder taps; no trainable state.
struct PseudoInverseDecoder {};

using DecoderSpec = std::variant<TransposedDecoder, LinearCombinationDecoder, PseudoInverseDecoder>;

inline DecoderVariant variant_of(const DecoderSpec& d) {
  return static_cast<DecoderVariant>(d.index());
}

inline std::vector<double> softmax(std::span<const double> z) {
  if (z.empty()) return {};
  const double peak = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) total += p[k] = std::exp(z[k] - peak);
  for (double& v : p) v /= total;
  return p;
}

inline std::vector<double> decode_transposed(const FrameMatrix& fm, const Matrix& synth_taps) {
  const std::size_t length = static_cast<std::size_t>(fm.kernel_len);
  if (synth_taps.rows() != fm.channels() || synth_taps.cols() != length) {
    throw InvalidParameter("decode_transposed: synthesis taps must be N x L");
  }
  if (fm.frames() > 0 && (fm.frames() - 1) * fm.hop + length > fm.source_len) {
    throw InvalidParameter("decode_transposed: frame metadata inconsistent with source length");
  }
  std::vector<double> out(fm.source_len, 0.0);
  for (std::size_t t = 0; t < fm.frames(); ++t) {
    double* dst = out.data() + t * fm.hop;
    for (std::size_t i = 0; i < fm.channels(); ++i) {
      const double a = fm.data(i, t);
      if (a == 0.0) continue;
      const double* s = synth_taps.row(i).data();
      for (std::size_t k = 0; k < length; ++k) dst[k] += a * s[k];
    }
  }
  return out;
}

/// Full-rate channel merge. Output sample t + L - 1 holds frame t, i.e. the causal filter
/// output, which carries the filters' M-sample group delay. The first L-1 samples are zero.
inline std::vector<double> decode_linear_combination(const FrameMatrix& fm, std::span<const double> gamma) {
  if (fm.hop != 1) {
    throw UnsupportedConfiguration("linear-combination decoder requires hop = 1 (got " +
                                   std::to_string(fm.hop) + ")");
  }
  if (gamma.size() != fm.channels()) throw InvalidParameter("decode_linear_combination: one weight per channel");
  if (fm.frames() + static_cast<std::size_t>(fm.kernel_len) - 1 != fm.source_len) {
    throw InvalidParameter("decode_linear_combination: frame metadata inconsistent with source length");
  }
  const auto weights = softmax(gamma);
  std::vector<double> out(fm.source_len, 0.0);
  double* dst = out.data() + (fm.kernel_len - 1);
  for (std::size_t i = 0; i < fm.channels(); ++i) {
    const double w = weights[i];
    const double* src = fm.data.row(i).data();
    for (std::size_t t = 0; t < fm.frames(); ++t) dst[t] += w * src[t];
  }
  return out;
}

/// Matrix F with F(i, k) = taps(i, L-1-k): encode computes F * x[t*hop : t*hop+L].
inline Matrix analysis_matrix(const Matrix& taps) {
  Matrix f(taps.rows(), taps.cols());
  const std::size_t last = taps.cols() - 1;
  for (std::size_t i = 0; i < taps.rows(); ++i)
    for (std::size_t k = 0; k < taps.cols(); ++k) f(i, k) = taps(i, last - k);
  return f;
}

/// Moore-Penrose pseudo-inverse via SVD, dropping singular values below rel_tol * sigma_max.
inline Matrix pseudo_inverse(const Matrix& a, double rel_tol = 1e-10) {
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajor> map(a.values().data(), static_cast<Eigen::Index>(a.rows()),
                                 static_cast<Eigen::Index>(a.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(map, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double sigma_max = sv.size() > 0 ? sv(0) : 0.0;
  if (!(sigma_max > 0.0)) throw SingularOperator("pseudo-inverse of an all-zero operator");
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > rel_tol * sigma_max) inv(k) = 1.0 / sv(k);
  }
  const Eigen::MatrixXd pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
  Matrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c)
      out(r, c) = pinv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  return out;
}

/// Number of frames covering each output sample.
inline std::vector<double> frame_coverage(const FrameMatrix& fm) {
  std::vector<double> count(fm.source_len, 0.0);
  for (std::size_t t = 0; t < fm.frames(); ++t)
    for (std::size_t k = 0; k < static_cast<std::size_t>(fm.kernel_len); ++k) count[t * fm.hop + k] += 1.0;
  return count;
}

/// Reconstructs each frame as pinv * features, overlap-adds, divides by frame coverage.
/// `pinv` is L x N, as returned by pseudo_inverse(analysis_matrix(taps)).
inline std::vector<double> decode_pinv(const FrameMatrix& fm, const Matrix& pinv) {
  const std::size_t length = static_cast<std::size_t>(fm.kernel_len);
  if (pinv.rows() != length || pinv.cols() != fm.channels()) {
    throw InvalidParameter("decode_pinv: pseudo-inverse must be L x N");
  }
  if (fm.frames() > 0 && (fm.frames() - 1) * fm.hop + length > fm.source_len) {
    throw InvalidParameter("decode_pinv: frame metadata inconsistent with source length");
  }
  std::vector<double> out(fm.source_len, 0.0);
  std::vector<double> column(fm.channels());
  for (std::size_t t = 0; t < fm.frames(); ++t) {
    for (std::size_t i = 0; i < fm.channels(); ++i) column[i] = fm.data(i, t);
    double* dst = out.data() + t * fm.hop;
    for (std::size_t k = 0; k < length; ++k) dst[k] += detail::dot(pinv.row(k).data(), column.data(), column.size());
  }
  const auto count = frame_coverage(fm);
  for (std::size_t n = 0; n < out.size(); ++n)
    if (count[n] > 0.0) out[n] /= count[n];
  return out;
}

inline std::vector<double> decode_pinv(const FrameMatrix& fm, const Filterbank& fb) {
  if (fb.size() > static_cast<std::size_t>(fb.kernel_len())) {
    throw InvalidParameter("decode_pinv: expects N <= L");
  }
  return decode_pinv(fm, pseudo_inverse(analysis_matrix(fb.taps())));
}

struct ParameterCounts {
  std::size_t encoder_sinc = 0;   // two raw cutoffs + band gain per filter
  std::size_t encoder_dense = 0;  // a free N x L convolution of the same shape
  std::size_t mask = 0;
  std::size_t decoder = 0;
};

inline ParameterCounts parameter_count(const Filterbank& fb, DecoderVariant decoder) {
  const std::size_t n = fb.size();
  const std::size_t l = static_cast<std::size_t>(fb.kernel_len());
  ParameterCounts c{3 * n, n * l, n, 0};
  switch (decoder) {
    case DecoderVariant::transposed: c.decoder = n * l; break;
    case DecoderVariant::linear_combination: c.decoder = n; break;
    case DecoderVariant::pseudo_inverse: c.decoder = 0; break;
  }
  return c;
}

// ---------------------------------------------------------------------------------------------
// Whole model

struct PipelineConfig {
  std::size_t hop = 1;
  bool normalize = false;
  double norm_eps = 1e-8;
};

struct EnhancementModel {
  Filterbank bank;
  std::vector<double> mask_logits;
  DecoderSpec decoder;
  PipelineConfig config;

  DecoderVariant decoder_variant() const { return variant_of(decoder); }
};

inline void validate(const EnhancementModel& m) {
  const std::size_t n = m.bank.size();
  if (m.mask_logits.size() != n) throw InvalidParameter("model: one mask logit per filter");
  if (m.config.hop == 0) throw InvalidParameter("model: hop must be >= 1");
  if (const auto* t = std::get_if<TransposedDecoder>(&m.decoder)) {
    if (t->synth_taps.rows() != n || t->synth_taps.cols() != static_cast<std::size_t>(m.bank.kernel_len()))
      throw InvalidParameter("model: synthesis taps must be N x L");
  }
  if (const auto* lc = std::get_if<LinearCombinationDecoder>(&m.decoder)) {
    if (lc->gamma.size() != n) throw InvalidParameter("model: one combination weight per filter");
    if (m.config.hop != 1) throw UnsupportedConfiguration("linear-combination decoder requires hop = 1");
  }
}

/// Where the decoded signal lines up with the clean reference: output[out_begin + k]
/// corresponds to reference[ref_begin + k] for k < length.
struct OutputAlignment {
  std::size_t out_begin = 0;
  std::size_t ref_begin = 0;
  std::size_t length = 0;
};

inline OutputAlignment output_alignment(DecoderVariant variant, int kernel_len, std::size_t signal_len) {
  if (variant == DecoderVariant::linear_combination) {
    const std::size_t l = static_cast<std::size_t>(kernel_len);
    return {l - 1, (l - 1) / 2, signal_len - l + 1};
  }
  return {0, 0, signal_len};
}

/// Every intermediate of one forward pass.
struct PipelineTrace {
  FrameMatrix features;  // encoder output; unit band gain when normalizing
  FrameMatrix shaped;    // normalized and gain-scaled, or == features
  Mask mask;
  FrameMatrix masked;
  Matrix pinv;  // only for the pseudo-inverse decoder
  std::vector<double> output;
};

inline PipelineTrace forward_trace(const EnhancementModel& m, std::span<const double> x) {
  validate(m);
  PipelineTrace tr;
  if (m.config.normalize) {
    tr.features = encode(x, m.bank.unit_gain_taps(), m.config.hop);
    const auto gains = m.bank.betas();
    tr.shaped = layer_normalize(tr.features, m.config.norm_eps, gains);
  } else {
    tr.features = encode(x, m.bank.taps(), m.config.hop);
    tr.shaped = tr.features;
  }
  tr.mask = estimate_mask(tr.shaped, m.mask_logits);
  tr.masked = apply_mask(tr.shaped, tr.mask);
  switch (m.decoder_variant()) {
    case DecoderVariant::transposed:
      tr.output = decode_transposed(tr.masked, std::get<TransposedDecoder>(m.decoder).synth_taps);
      break;
    case DecoderVariant::linear_combination:
      tr.output = decode_linear_combination(tr.masked, std::get<LinearCombinationDecoder>(m.decoder).gamma);
      break;
    case DecoderVariant::pseudo_inverse:
      tr.pinv = pseudo_inverse(analysis_matrix(m.bank.taps()));
      tr.output = decode_pinv(tr.masked, tr.pinv);
      break;
  }
  return tr;
}

inline std::vector<double> enhance(const EnhancementModel& m, std::span<const double> x) {
  return forward_trace(m, x).output;
}

}  // namespace sincfb
