#pragma once

// Plain CSV tables: analysis exports, training history, and formant curve input.

#include <charconv>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "init_strategies.hpp"
#include "trainer.hpp"
#include "wav.hpp"

namespace sincfb {

/// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string cfr_csv(const CfrCurve& c) {
  std::string s = "freq_hz,magnitude\n";
  for (std::size_t k = 0; k < c.freqs.size(); ++k) s += format_number(c.freqs[k]) + "," + format_number(c.magnitude[k]) + "\n";
  return s;
}

inline std::string cutoffs_csv(const std::vector<CutoffRow>& rows) {
  std::string s = "index,f_low_hz,f_high_hz,beta\n";
  for (const auto& r : rows)
    s += std::to_string(r.index) + "," + format_number(r.f_low_hz) + "," + format_number(r.f_high_hz) + "," +
         format_number(r.beta) + "\n";
  return s;
}

inline std::string history_csv(const TrainHistory& h) {
  std::string s = "step,loss,val_sisnr_db,displacement\n";
  for (const auto& r : h.rows)
    s += std::to_string(r.step) + "," + format_number(r.loss) + "," + format_number(r.val_sisnr_db) + "," +
         format_number(r.displacement) + "\n";
  return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  detail::write_file_atomic(path, text);
}

namespace detail {

inline bool parse_number(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc{} && r.ptr == s.data() + s.size();
}

/// Numeric rows of a comma-separated table. A non-numeric first line is a header.
inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, std::size_t columns) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::string_view rest(line);
    bool ok = true;
    while (true) {
      const auto comma = rest.find(',');
      double v = 0.0;
      ok = ok && parse_number(rest.substr(0, comma), v);
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!ok || row.size() != columns) {
      if (lineno == 1 && rows.empty()) continue;
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(columns) +
                    " numeric columns");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Two-column (freq_hz, magnitude) curve; header optional.
inline TabulatedCurve read_curve_csv(const std::filesystem::path& path) {
  TabulatedCurve c;
  for (const auto& r : detail::read_numeric_csv(path, 2)) {
    c.freqs.push_back(r[0]);
    c.values.push_back(r[1]);
  }
  c.validate();
  return c;
}

inline std::vector<CutoffRow> read_cutoffs_csv(const std::filesystem::path& path) {
  std::vector<CutoffRow> rows;
  for (const auto& r : detail::read_numeric_csv(path, 4))
    rows.push_back({static_cast<std::size_t>(r[0]), r[1], r[2], r[3]});
  return rows;
}

}  // namespace sincfb
