#pragma once

// Command-line surface. cli_dispatch() is the whole program; tools/sincfb.cpp only forwards
// argv to it. Exit status: 0 success, 1 usage error, 2 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "analysis.hpp"
#include "autodiff.hpp"
#include "checkpoint.hpp"
#include "csv.hpp"
#include "filter_core.hpp"
#include "init_strategies.hpp"
#include "pipeline.hpp"
#include "si_snr.hpp"
#include "synth.hpp"
#include "trainer.hpp"
#include "wav.hpp"

namespace sincfb {

inline constexpr double kGradCheckThreshold = 1e-4;

struct EnhanceSummary {
  std::size_t samples = 0;
  std::size_t clipped = 0;
  std::optional<double> input_sisnr_db;   // noisy vs reference
  std::optional<double> output_sisnr_db;  // enhanced vs reference, aligned
  std::vector<std::string> warnings;

  std::optional<double> gain_db() const {
    if (!input_sisnr_db || !output_sisnr_db) return std::nullopt;
    return *output_sisnr_db - *input_sisnr_db;
  }
};

/// Loads a checkpoint, enhances `noisy_path`, writes PCM16 to `out_path`. With a reference,
/// SI-SNR is measured the same way the trainer measures validation pairs.
inline EnhanceSummary run_enhance(const std::filesystem::path& noisy_path, const std::filesystem::path& checkpoint_path,
                                  const std::filesystem::path& out_path,
                                  const std::optional<std::filesystem::path>& reference_path = std::nullopt,
                                  SampleFormat format = SampleFormat::pcm16) {
  EnhanceSummary s;
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  const AudioBuffer noisy = read_wav(noisy_path, &s.warnings);
  if (noisy.sample_rate != ck.model.bank.sample_rate()) {
    throw InvalidParameter("sample rate mismatch: audio " + format_number(noisy.sample_rate) + " Hz, checkpoint " +
                           format_number(ck.model.bank.sample_rate()) + " Hz");
  }
  if (noisy.sample_rate != kDefaultSampleRate) {
    s.warnings.push_back("sample rate " + format_number(noisy.sample_rate) + " Hz differs from the standard 16000 Hz");
  }
  const auto out = enhance(ck.model, noisy.samples);
  s.samples = out.size();
  s.clipped = write_wav(AudioBuffer{out, noisy.sample_rate, 1}, out_path, format).clipped;
  if (reference_path) {
    const AudioBuffer ref = read_wav(*reference_path, &s.warnings);
    if (ref.samples.size() != noisy.samples.size()) throw InvalidParameter("reference and input lengths differ");
    s.input_sisnr_db = si_snr(noisy.samples, ref.samples);
    s.output_sisnr_db = evaluate_si_snr(ck.model, out, ref.samples);
  }
  return s;
}

/// Causal FIR filtering with zero initial state; output has the input's length.
inline std::vector<double> apply_filter(std::span<const double> x, std::span<const double> taps) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    const std::size_t kmax = std::min(taps.size(), n + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k < kmax; ++k) acc += taps[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

namespace detail {

// Option name for a config key: "learning_rate" -> "--learning-rate".
inline std::string option_for_key(const std::string& key) {
  std::string name = "--" + key;
  for (char& c : name)
    if (c == '_') c = '-';
  return name;
}

inline std::string json_scalar(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return format_number(v.get<double>());
  return v.dump();
}

/// Fills options of `sub` that were not given on the command line from a JSON object.
inline void apply_json_config(CLI::App& sub, const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ConversionError("--config", std::string(e.what()));
  }
  if (!j.is_object()) throw CLI::ConversionError("--config", "config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    CLI::Option* opt = sub.get_option_no_throw(option_for_key(key));
    if (opt == nullptr) throw CLI::ExtrasError("unknown config key '" + key + "'", CLI::ExitCodes::ExtrasError);
    if (opt->count() > 0) continue;
    if (value.is_array()) {
      for (const auto& item : value) opt->add_result(json_scalar(item));
    } else {
      opt->add_result(json_scalar(value));
    }
    opt->run_callback();
  }
}

struct TrainOptions {
  TrainConfig config;
  SynthSpec synth;
  std::string decoder = "linear_combination";
  std::string init = "uniform";
  std::string mode = "reformed";
  std::size_t hop = 0;  // 0: 1 for the linear-combination decoder, 125 otherwise
  std::string formant_csv;
};

inline void add_model_options(CLI::App& sub, TrainOptions& o) {
  sub.add_option("--n", o.config.n_filters, "Number of filters")->capture_default_str();
  sub.add_option("--kernel", o.config.kernel_len, "Kernel length (odd)")->capture_default_str();
  sub.add_option("--strategy,--init", o.init, "Initialization: uniform | formant | mel")->capture_default_str();
  sub.add_option("--seed", o.config.seed, "Initialization seed")->capture_default_str();
  sub.add_option("--sample-rate", o.config.sample_rate, "Sample rate in Hz")->capture_default_str();
  sub.add_option("--mode", o.mode, "Parametrization: reformed | original")->capture_default_str();
  sub.add_option("--fmin", o.config.f_min, "Lowest mel edge in Hz")->capture_default_str();
  sub.add_option("--formant-csv", o.formant_csv, "Formant curve CSV (freq_hz, magnitude)");
  sub.add_option("--decoder", o.decoder, "Decoder: transposed | linear_combination | pseudo_inverse")
      ->capture_default_str();
  sub.add_option("--hop", o.hop, "Encoder hop in samples (default: 1 for linear_combination, else 125)");
  sub.add_option("--normalize", o.config.normalization, "Per-channel layer normalization (true|false)")
      ->capture_default_str();
  sub.add_option("--norm-eps", o.config.norm_eps, "Normalization epsilon")->capture_default_str();
}

inline void add_synth_options(CLI::App& sub, SynthSpec& s) {
  sub.add_option("--tones", s.tone_freqs, "Tone frequencies in Hz")->capture_default_str();
  sub.add_option("--amps", s.tone_amps, "Tone amplitudes")->capture_default_str();
  sub.add_option("--noise-low", s.noise_low_hz, "Noise band lower edge in Hz")->capture_default_str();
  sub.add_option("--noise-high", s.noise_high_hz, "Noise band upper edge in Hz")->capture_default_str();
  sub.add_option("--snr", s.input_snr_db, "Input SI-SNR in dB")->capture_default_str();
  sub.add_option("--duration", s.duration, "Samples per pair")->capture_default_str();
  sub.add_option("--synth-seed", s.seed, "Synthetic data seed")->capture_default_str();
}

inline void resolve(TrainOptions& o) {
  o.config.decoder = parse_decoder_variant(o.decoder);
  o.config.init = parse_init_strategy(o.init);
  o.config.mode = parse_mode(o.mode);
  o.config.hop = o.hop != 0 ? o.hop : (o.config.decoder == DecoderVariant::linear_combination ? 1 : 125);
  if (!o.formant_csv.empty()) o.config.formant_curve = read_curve_csv(o.formant_csv);
  o.synth.sample_rate = o.config.sample_rate;
}

inline void print_inspect(std::ostream& out, const Checkpoint& ck) {
  const auto& m = ck.model;
  const auto counts = parameter_count(m.bank, m.decoder_variant());
  const auto census = filter_census(m.bank);
  out << "filters: " << m.bank.size() << "\n"
      << "kernel_len: " << m.bank.kernel_len() << "\n"
      << "sample_rate: " << format_number(m.bank.sample_rate()) << "\n"
      << "mode: " << to_string(m.bank.mode()) << "\n"
      << "decoder: " << to_string(m.decoder_variant()) << "\n"
      << "hop: " << m.config.hop << "\n"
      << "normalize: " << (m.config.normalize ? "true" : "false") << "\n"
      << "encoder parameters: " << counts.encoder_sinc << "\n"
      << "dense-equivalent encoder parameters: " << counts.encoder_dense << "\n"
      << "mask parameters: " << counts.mask << "\n"
      << "decoder parameters: " << counts.decoder << "\n"
      << "census: low_pass=" << census.low_pass << " high_pass=" << census.high_pass
      << " band_pass=" << census.band_pass << " degenerate=" << census.degenerate
      << " zero_gain=" << census.zero_gain << "\n";
}

inline void write_or_print(std::ostream& out, const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text(path, text);
  }
}

}  // namespace detail

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"Learnable windowed-sinc filterbank toolkit"};
  app.name("sincfb");
  app.require_subcommand(1);

  // init
  detail::TrainOptions init_opts;
  std::string init_out, init_config;
  auto* init = app.add_subcommand("init", "Build an initialized filterbank checkpoint");
  detail::add_model_options(*init, init_opts);
  init->add_option("--out", init_out, "Checkpoint path")->required();
  init->add_option("--config", init_config, "JSON file with option values (flags override)");

  // inspect
  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "Print filter census and parameter counts");
  inspect->add_option("checkpoint", inspect_path, "Checkpoint path")->required();

  // filter
  std::string filter_ckpt, filter_in, filter_out;
  std::size_t filter_index = 0;
  auto* filter = app.add_subcommand("filter", "Apply one filter of a bank to a WAV file");
  filter->add_option("--checkpoint", filter_ckpt, "Checkpoint path")->required();
  filter->add_option("--index", filter_index, "Filter index")->capture_default_str();
  filter->add_option("--in", filter_in, "Input WAV")->required();
  filter->add_option("--out", filter_out, "Output WAV")->required();

  // train
  detail::TrainOptions train_opts;
  std::string train_out, train_history, train_config;
  auto* train_cmd = app.add_subcommand("train", "Train on synthetic tone-in-noise data");
  detail::add_model_options(*train_cmd, train_opts);
  detail::add_synth_options(*train_cmd, train_opts.synth);
  train_cmd->add_option("--steps", train_opts.config.steps, "Optimization steps")->capture_default_str();
  train_cmd->add_option("--learning-rate,--lr", train_opts.config.learning_rate, "Adam learning rate")
      ->capture_default_str();
  train_cmd->add_option("--batch", train_opts.config.batch, "Pairs per step")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--history", train_history, "Training history CSV path");
  train_cmd->add_option("--config", train_config, "JSON file with option values (flags override)");

  // enhance
  std::string enh_ckpt, enh_in, enh_out, enh_ref, enh_format = "pcm16";
  auto* enh = app.add_subcommand("enhance", "Run the enhancement pipeline on a WAV file");
  enh->add_option("--checkpoint", enh_ckpt, "Checkpoint path")->required();
  enh->add_option("--in", enh_in, "Noisy input WAV")->required();
  enh->add_option("--out", enh_out, "Enhanced output WAV")->required();
  enh->add_option("--reference", enh_ref, "Clean reference WAV for SI-SNR reporting");
  enh->add_option("--format", enh_format, "Output sample format")
      ->check(CLI::IsMember({"pcm16", "float32"}))
      ->capture_default_str();

  // check-grads
  std::uint64_t gc_seed = 7;
  double gc_step = 1e-5;
  std::string gc_decoder = "linear_combination", gc_mode = "reformed";
  bool gc_normalize = true;
  auto* gc = app.add_subcommand("check-grads", "Compare analytic gradients with central differences");
  gc->add_option("--seed", gc_seed, "Problem seed")->capture_default_str();
  gc->add_option("--step", gc_step, "Finite-difference half-width")->capture_default_str();
  gc->add_option("--decoder", gc_decoder, "Decoder: transposed | linear_combination")->capture_default_str();
  gc->add_option("--mode", gc_mode, "Parametrization: reformed | original")->capture_default_str();
  gc->add_option("--normalize", gc_normalize, "Layer normalization (true|false)")->capture_default_str();

  // export-cfr
  std::string cfr_ckpt, cfr_out;
  int cfr_grid = kDefaultCfrGrid;
  auto* cfr = app.add_subcommand("export-cfr", "Write the cumulative frequency response as CSV");
  cfr->add_option("checkpoint", cfr_ckpt, "Checkpoint path")->required();
  cfr->add_option("--grid", cfr_grid, "Frequency grid points")->capture_default_str();
  cfr->add_option("--out", cfr_out, "CSV path (stdout when omitted)");

  // export-cutoffs
  std::string cut_ckpt, cut_out, cut_sort = "lower";
  auto* cut = app.add_subcommand("export-cutoffs", "Write cutoffs and band gains as CSV");
  cut->add_option("checkpoint", cut_ckpt, "Checkpoint path")->required();
  cut->add_option("--sort", cut_sort, "Sort key")->check(CLI::IsMember({"lower", "upper"}))->capture_default_str();
  cut->add_option("--out", cut_out, "CSV path (stdout when omitted)");

  // synth
  SynthSpec synth_spec;
  std::string synth_noisy, synth_clean, synth_config, synth_format = "pcm16";
  std::size_t synth_index = 0;
  bool synth_validation = false;
  auto* synth = app.add_subcommand("synth", "Write one synthetic (noisy, clean) pair as WAV files");
  detail::add_synth_options(*synth, synth_spec);
  synth->add_option("--sample-rate", synth_spec.sample_rate, "Sample rate in Hz")->capture_default_str();
  synth->add_option("--index", synth_index, "Training pair index")->capture_default_str();
  synth->add_flag("--validation", synth_validation, "Write the validation pair used during training");
  synth->add_option("--noisy", synth_noisy, "Noisy WAV path")->required();
  synth->add_option("--clean", synth_clean, "Clean WAV path")->required();
  synth->add_option("--format", synth_format, "Output sample format")
      ->check(CLI::IsMember({"pcm16", "float32"}))
      ->capture_default_str();
  synth->add_option("--config", synth_config, "JSON file with option values (flags override)");

  try {
    app.parse(argc, argv);
    if (!init_config.empty()) detail::apply_json_config(*init, init_config);
    if (!train_config.empty()) detail::apply_json_config(*train_cmd, train_config);
    if (!synth_config.empty()) detail::apply_json_config(*synth, synth_config);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::Error& e) {
    app.exit(e, err, err);
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (init->parsed()) {
      detail::resolve(init_opts);
      Checkpoint ck{initial_model(init_opts.config), {}};
      ck.provenance["init"] = {{"strategy", to_string(init_opts.config.init)}, {"seed", init_opts.config.seed}};
      save_checkpoint(ck, init_out);
      out << "wrote " << init_out << " (" << ck.model.bank.size() << " filters, " << to_string(init_opts.config.init)
          << " init)\n";
    } else if (inspect->parsed()) {
      detail::print_inspect(out, load_checkpoint(inspect_path));
    } else if (filter->parsed()) {
      const Checkpoint ck = load_checkpoint(filter_ckpt);
      if (filter_index >= ck.model.bank.size()) throw InvalidParameter("filter index out of range");
      const AudioBuffer in = read_wav(filter_in);
      if (in.sample_rate != ck.model.bank.sample_rate()) throw InvalidParameter("sample rate mismatch with checkpoint");
      const auto y = apply_filter(in.samples, ck.model.bank.filter(filter_index).taps);
      const auto rep = write_wav(AudioBuffer{y, in.sample_rate, 1}, filter_out);
      out << "wrote " << filter_out << " (" << y.size() << " samples, " << rep.clipped << " clipped)\n";
    } else if (train_cmd->parsed()) {
      detail::resolve(train_opts);
      const TrainResult r = train(train_opts.config, train_opts.synth);
      Checkpoint ck{r.model, {}};
      ck.provenance["train_config"] = to_json(train_opts.config);
      ck.provenance["synth"] = to_json(train_opts.synth);
      ck.provenance["seeds"] = {{"init", train_opts.config.seed}, {"synth", train_opts.synth.seed}};
      save_checkpoint(ck, train_out);
      if (!train_history.empty()) write_text(train_history, history_csv(r.history));
      const auto& last = r.history.rows.back();
      out << "steps: " << last.step << "\n"
          << "final loss: " << format_number(last.loss) << "\n"
          << "validation SI-SNR: " << format_number(last.val_sisnr_db) << " dB\n"
          << "input SI-SNR: " << format_number(r.history.input_sisnr_db) << " dB\n"
          << "improvement: " << format_number(r.history.final_improvement_db()) << " dB\n"
          << "cutoff displacement: " << format_number(last.displacement) << "\n";
    } else if (enh->parsed()) {
      std::optional<std::filesystem::path> ref;
      if (!enh_ref.empty()) ref = enh_ref;
      const auto s = run_enhance(enh_in, enh_ckpt, enh_out, ref, parse_sample_format(enh_format));
      for (const auto& w : s.warnings) err << "warning: " << w << "\n";
      out << "wrote " << enh_out << " (" << s.samples << " samples, " << s.clipped << " clipped)\n";
      if (s.gain_db()) {
        out << "input SI-SNR: " << format_number(*s.input_sisnr_db) << " dB\n"
            << "output SI-SNR: " << format_number(*s.output_sisnr_db) << " dB\n"
            << "gain: " << format_number(*s.gain_db()) << " dB\n";
      }
    } else if (gc->parsed()) {
      const auto variant = parse_decoder_variant(gc_decoder);
      if (variant == DecoderVariant::pseudo_inverse)
        throw UnsupportedConfiguration("gradients do not flow through the pseudo-inverse decoder");
      const auto prob = make_gradcheck_problem(gc_seed, variant, gc_normalize, parse_mode(gc_mode));
      const FdReport rep = finite_difference_check(prob.model, prob.input, prob.target, gc_step);
      const bool pass = rep.max_rel_error < kGradCheckThreshold;
      out << (pass ? "PASS" : "FAIL") << " check-grads max_rel_error=" << format_number(rep.max_rel_error)
          << " worst=" << rep.worst_param << "\n";
      const nlohmann::json report = {{"seed", gc_seed},           {"step", gc_step},
                                     {"decoder", to_string(variant)}, {"normalize", gc_normalize},
                                     {"mode", gc_mode},           {"max_rel_error", rep.max_rel_error},
                                     {"worst_param", rep.worst_param}, {"checked", rep.checked},
                                     {"skipped", rep.skipped},    {"threshold", kGradCheckThreshold},
                                     {"pass", pass}};
      out << report.dump() << "\n";
      return pass ? 0 : 2;
    } else if (cfr->parsed()) {
      const Checkpoint ck = load_checkpoint(cfr_ckpt);
      detail::write_or_print(out, cfr_out, cfr_csv(cumulative_frequency_response(ck.model.bank, cfr_grid)));
    } else if (cut->parsed()) {
      const Checkpoint ck = load_checkpoint(cut_ckpt);
      const auto key = cut_sort == "upper" ? CutoffSortKey::upper : CutoffSortKey::lower;
      detail::write_or_print(out, cut_out, cutoffs_csv(export_cutoffs_and_gains(ck.model.bank, key)));
    } else if (synth->parsed()) {
      const SignalPair pair = synth_validation ? validation_pair(synth_spec) : synth_pair(synth_spec, kTrainStream, synth_index);
      const auto format = parse_sample_format(synth_format);
      const auto r1 = write_wav(AudioBuffer{pair.noisy, synth_spec.sample_rate, 1}, synth_noisy, format);
      const auto r2 = write_wav(AudioBuffer{pair.clean, synth_spec.sample_rate, 1}, synth_clean, format);
      if (r1.clipped + r2.clipped > 0) err << "warning: " << (r1.clipped + r2.clipped) << " samples clipped\n";
      out << "wrote " << synth_noisy << " and " << synth_clean << " (" << pair.noisy.size() << " samples, input SI-SNR "
          << format_number(si_snr(pair.noisy, pair.clean)) << " dB)\n";
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace sincfb
