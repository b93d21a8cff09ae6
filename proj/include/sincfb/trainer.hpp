#pragma once

// Desk-scale training loop: fresh synthetic pairs every step, Adam on every trainable
// parameter, band gains projected onto >= 0 after each update.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "autodiff.hpp"
#include "errors.hpp"
#include "filter_core.hpp"
#include "init_strategies.hpp"
#include "optimizer.hpp"
#include "pipeline.hpp"
#include "synth.hpp"

namespace sincfb {

struct TrainConfig {
  std::size_t steps = 2000;
  double learning_rate = 1e-3;
  std::size_t batch = 1;
  std::size_t hop = 1;
  DecoderVariant decoder = DecoderVariant::linear_combination;
  InitStrategy init = InitStrategy::uniform;
  std::uint64_t seed = 0;
  Mode mode = Mode::reformed;
  bool normalization = true;
  double norm_eps = 1e-8;
  std::size_t n_filters = 80;
  int kernel_len = 251;
  double sample_rate = kDefaultSampleRate;
  double f_min = 0.0;                  // mel init only
  std::optional<TabulatedCurve> formant_curve;  // formant init; synthetic curve when empty

  void validate() const {
    if (steps < 1) throw InvalidParameter("train: steps must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InvalidParameter("train: learning rate must be >= 0");
    if (batch < 1) throw InvalidParameter("train: batch must be >= 1");
    if (hop < 1) throw InvalidParameter("train: hop must be >= 1");
    if (n_filters < 1) throw InvalidParameter("train: need at least one filter");
    check_kernel_length(kernel_len);
    if (decoder == DecoderVariant::linear_combination && hop != 1)
      throw UnsupportedConfiguration("linear-combination decoder requires hop = 1");
  }
};

/// Nyquist-normalized raw cutoffs from the chosen strategy.
inline std::vector<RawCutoffPair> initial_cutoffs(const TrainConfig& c) {
  switch (c.init) {
    case InitStrategy::uniform: return init_uniform(c.n_filters, c.seed);
    case InitStrategy::mel: return init_mel(c.n_filters, c.sample_rate, c.f_min);
    case InitStrategy::formant: {
      const TabulatedCurve curve = c.formant_curve ? *c.formant_curve : synthetic_formant_curve(c.sample_rate);
      return init_formant(c.n_filters, cfr_to_pmf(curve, 512, c.sample_rate), c.seed, c.sample_rate);
    }
  }
  throw InvalidParameter("unknown init strategy");
}

/// Freshly initialized model: band gains 1, mask logits 0, combination weights 0, synthesis
/// filters copied from the encoder. Original mode stores the cutoffs in Hz.
inline EnhancementModel initial_model(const TrainConfig& c) {
  c.validate();
  auto raw = initial_cutoffs(c);
  if (c.mode == Mode::original) {
    const double nyquist = c.sample_rate / 2.0;
    for (auto& r : raw) r = {r.a1_raw * nyquist, r.a2_raw * nyquist};
  }
  Filterbank bank(std::move(raw), c.kernel_len, c.sample_rate, c.mode);
  DecoderSpec decoder;
  switch (c.decoder) {
    case DecoderVariant::transposed: decoder = TransposedDecoder{bank.taps()}; break;
    case DecoderVariant::linear_combination:
      decoder = LinearCombinationDecoder{std::vector<double>(c.n_filters, 0.0)};
      break;
    case DecoderVariant::pseudo_inverse: decoder = PseudoInverseDecoder{}; break;
  }
  EnhancementModel m{std::move(bank), std::vector<double>(c.n_filters, 0.0), std::move(decoder),
                     PipelineConfig{c.hop, c.normalization, c.norm_eps}};
  validate(m);
  return m;
}

/// Mean over filters of |a1 - a1_init| + |a2 - a2_init| on the Nyquist-normalized scale.
inline double cutoff_displacement(const Filterbank& now, const Filterbank& init) {
  if (now.size() != init.size()) throw InvalidParameter("displacement: filter count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < now.size(); ++i) {
    const auto& a = now.filter(i).band;
    const auto& b = init.filter(i).band;
    total += std::abs(a.a1 - b.a1) + std::abs(a.a2 - b.a2);
  }
  return total / static_cast<double>(now.size());
}

struct HistoryRow {
  std::size_t step = 0;
  double loss = 0.0;
  double val_sisnr_db = 0.0;
  double displacement = 0.0;
};

struct TrainHistory {
  double input_sisnr_db = 0.0;  // validation mixture before enhancement
  std::vector<HistoryRow> rows;

  double final_improvement_db() const { return rows.empty() ? 0.0 : rows.back().val_sisnr_db - input_sisnr_db; }
};

struct TrainResult {
  EnhancementModel model;
  EnhancementModel initial;
  TrainHistory history;
};

inline TrainResult train(const TrainConfig& config, const SynthSpec& spec) {
  config.validate();
  spec.validate();
  if (spec.duration < 4 * static_cast<std::size_t>(config.kernel_len))
    throw InvalidParameter("train: synthetic duration must be at least 4 kernel lengths");
  if (std::abs(spec.sample_rate - config.sample_rate) > 0.0)
    throw InvalidParameter("train: synth and model sample rates differ");

  const EnhancementModel initial = initial_model(config);
  EnhancementModel model = initial;
  auto params = pack_parameters(model);
  Adam opt(params.size(), AdamParams{config.learning_rate});
  const std::size_t n = model.bank.size();

  const SignalPair val = validation_pair(spec);
  TrainHistory history;
  history.input_sisnr_db = si_snr(val.noisy, val.clean);
  history.rows.reserve(config.steps);

  std::vector<double> grad(params.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double step_loss = 0.0;
    for (std::size_t b = 0; b < config.batch; ++b) {
      const SignalPair pair = synth_pair(spec, kTrainStream, step * config.batch + b);
      BackwardResult r;
      try {
        r = backward(model, pair.noisy, pair.clean);
      } catch (const NumericFailure& e) {
        throw NumericFailure("step " + std::to_string(step + 1) + ": " + e.what());
      }
      const auto g = pack_gradients(model, r.grads);
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g[k] / static_cast<double>(config.batch);
      step_loss += r.loss / static_cast<double>(config.batch);
    }
    if (!std::isfinite(step_loss)) throw NumericFailure("step " + std::to_string(step + 1) + ": non-finite loss");

    opt.step(params, grad);
    for (std::size_t i = 2 * n; i < 3 * n; ++i) params[i] = std::max(params[i], 0.0);
    model = unpack_parameters(model, params);

    HistoryRow row;
    row.step = step + 1;
    row.loss = step_loss;
    row.val_sisnr_db = evaluate_si_snr(model, enhance(model, val.noisy), val.clean);
    row.displacement = cutoff_displacement(model.bank, initial.bank);
    if (!std::isfinite(row.val_sisnr_db))
      throw NumericFailure("step " + std::to_string(step + 1) + ": non-finite validation SI-SNR");
    history.rows.push_back(row);
  }
  return {std::move(model), initial, std::move(history)};
}

}  // namespace sincfb
