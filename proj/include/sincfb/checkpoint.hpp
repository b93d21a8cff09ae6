#pragma once

// Versioned JSON checkpoint. Only raw trainable values are stored; filter taps are
// rematerialized on load.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "filter_core.hpp"
#include "init_strategies.hpp"
#include "pipeline.hpp"
#include "synth.hpp"
#include "trainer.hpp"
#include "wav.hpp"

namespace sincfb {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  EnhancementModel model;
  nlohmann::json provenance = nlohmann::json::object();  // training config echo and seeds
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"steps", c.steps},
                      {"learning_rate", c.learning_rate},
                      {"batch", c.batch},
                      {"hop", c.hop},
                      {"decoder", to_string(c.decoder)},
                      {"init", to_string(c.init)},
                      {"seed", c.seed},
                      {"mode", to_string(c.mode)},
                      {"normalization", c.normalization},
                      {"norm_eps", c.norm_eps},
                      {"n_filters", c.n_filters},
                      {"kernel_len", c.kernel_len},
                      {"sample_rate", c.sample_rate},
                      {"f_min", c.f_min}};
  j["formant_curve"] = c.formant_curve ? "custom" : "synthetic";
  return j;
}

inline nlohmann::json to_json(const SynthSpec& s) {
  return {{"tone_freqs", s.tone_freqs},
          {"tone_amps", s.tone_amps},
          {"noise_low_hz", s.noise_low_hz},
          {"noise_high_hz", s.noise_high_hz},
          {"input_snr_db", s.input_snr_db},
          {"duration", s.duration},
          {"seed", s.seed},
          {"sample_rate", s.sample_rate}};
}

inline nlohmann::json to_json(const Checkpoint& ck) {
  const auto& m = ck.model;
  nlohmann::json filters = nlohmann::json::array();
  for (std::size_t i = 0; i < m.bank.size(); ++i) {
    filters.push_back({{"a1_raw", m.bank.raw_params()[i].a1_raw},
                       {"a2_raw", m.bank.raw_params()[i].a2_raw},
                       {"beta", m.bank.filter(i).beta}});
  }
  nlohmann::json decoder = {{"variant", to_string(m.decoder_variant())}};
  if (const auto* lc = std::get_if<LinearCombinationDecoder>(&m.decoder)) {
    decoder["gamma"] = lc->gamma;
  } else if (const auto* tc = std::get_if<TransposedDecoder>(&m.decoder)) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < tc->synth_taps.rows(); ++i) {
      const auto r = tc->synth_taps.row(i);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    decoder["synth_taps"] = std::move(rows);
  }
  return {{"format_version", kCheckpointVersion},
          {"sample_rate", m.bank.sample_rate()},
          {"kernel_len", m.bank.kernel_len()},
          {"mode", to_string(m.bank.mode())},
          {"filters", std::move(filters)},
          {"mask_logits", m.mask_logits},
          {"pipeline", {{"hop", m.config.hop}, {"normalize", m.config.normalize}, {"norm_eps", m.config.norm_eps}}},
          {"decoder", std::move(decoder)},
          {"provenance", ck.provenance}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
      throw IoError("unsupported checkpoint format_version " + std::to_string(version));
    const double sample_rate = j.at("sample_rate").get<double>();
    const int kernel_len = j.at("kernel_len").get<int>();
    const Mode mode = parse_mode(j.at("mode").get<std::string>());
    std::vector<RawCutoffPair> raw;
    std::vector<double> betas;
    for (const auto& f : j.at("filters")) {
      raw.push_back({f.at("a1_raw").get<double>(), f.at("a2_raw").get<double>()});
      betas.push_back(f.at("beta").get<double>());
    }
    Filterbank bank(std::move(raw), std::move(betas), kernel_len, sample_rate, mode);
    const auto& pj = j.at("pipeline");
    PipelineConfig pc{pj.at("hop").get<std::size_t>(), pj.at("normalize").get<bool>(), pj.at("norm_eps").get<double>()};
    const auto& dj = j.at("decoder");
    DecoderSpec decoder;
    switch (parse_decoder_variant(dj.at("variant").get<std::string>())) {
      case DecoderVariant::transposed: {
        const auto& rows = dj.at("synth_taps");
        Matrix synth(rows.size(), rows.empty() ? 0 : rows.at(0).size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto r = rows[i].get<std::vector<double>>();
          if (r.size() != synth.cols()) throw IoError("checkpoint: ragged synth_taps");
          std::copy(r.begin(), r.end(), synth.row(i).begin());
        }
        decoder = TransposedDecoder{std::move(synth)};
        break;
      }
      case DecoderVariant::linear_combination:
        decoder = LinearCombinationDecoder{dj.at("gamma").get<std::vector<double>>()};
        break;
      case DecoderVariant::pseudo_inverse: decoder = PseudoInverseDecoder{}; break;
    }
    Checkpoint ck{EnhancementModel{std::move(bank), j.at("mask_logits").get<std::vector<double>>(), std::move(decoder), pc},
                  j.value("provenance", nlohmann::json::object())};
    validate(ck.model);
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline std::string serialize_checkpoint(const Checkpoint& ck) { return to_json(ck).dump(2) + "\n"; }

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  detail::write_file_atomic(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace sincfb
