#pragma once

// RIFF/WAVE reading (PCM16 and float32, mono or stereo) and PCM16 writing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"

namespace sincfb {

struct AudioBuffer {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  double sample_rate = 16000.0;
  int channels = 1;
};

namespace detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}
inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

/// Writes to a sibling temporary file and renames it over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace detail

/// Stereo input is averaged to mono; a note is appended to `warnings` when given.
inline AudioBuffer read_wav(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr) {
  const std::string bytes = detail::read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
    throw IoError(path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= size) {
    const std::string id(reinterpret_cast<const char*>(p + pos), 4);
    const std::size_t chunk = detail::le32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk > size) throw IoError(path.string() + ": truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (chunk < 16) throw IoError(path.string() + ": 'fmt ' chunk too short");
      format = detail::le16(p + body);
      channels = detail::le16(p + body + 2);
      rate = detail::le32(p + body + 4);
      bits = detail::le16(p + body + 14);
      if (format == 0xFFFE && chunk >= 26) format = detail::le16(p + body + 24);  // extensible subformat
      have_fmt = true;
    } else if (id == "data") {
      data = p + body;
      data_size = chunk;
    }
    pos = body + chunk + (chunk & 1);
  }
  if (!have_fmt) throw IoError(path.string() + ": missing 'fmt ' chunk");
  if (data == nullptr) throw IoError(path.string() + ": missing 'data' chunk");
  const bool pcm16 = format == 1 && bits == 16;
  const bool float32 = format == 3 && bits == 32;
  if (!pcm16 && !float32)
    throw IoError(path.string() + ": 'fmt ' chunk declares unsupported codec (format " + std::to_string(format) +
                  ", " + std::to_string(bits) + " bits)");
  if (channels != 1 && channels != 2)
    throw IoError(path.string() + ": 'fmt ' chunk declares " + std::to_string(channels) + " channels");
  if (rate == 0) throw IoError(path.string() + ": 'fmt ' chunk declares zero sample rate");

  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
  if (data_size % frame_bytes != 0) throw IoError(path.string() + ": truncated 'data' chunk");
  const std::size_t frames = data_size / frame_bytes;

  auto sample_at = [&](std::size_t frame, int ch) {
    const unsigned char* q = data + frame * frame_bytes + static_cast<std::size_t>(ch) * (bits / 8);
    if (pcm16) return static_cast<double>(static_cast<std::int16_t>(detail::le16(q))) / 32768.0;
    const std::uint32_t u = detail::le32(q);
    float f;
    std::memcpy(&f, &u, sizeof f);
    return static_cast<double>(f);
  };

  AudioBuffer buf;
  buf.sample_rate = rate;
  buf.samples.resize(frames);
  for (std::size_t n = 0; n < frames; ++n) {
    buf.samples[n] = channels == 1 ? sample_at(n, 0) : 0.5 * (sample_at(n, 0) + sample_at(n, 1));
  }
  if (channels == 2 && warnings) warnings->push_back(path.string() + ": stereo input averaged to mono");
  return buf;
}

struct WavWriteReport {
  std::size_t clipped = 0;
};

enum class SampleFormat { pcm16, float32 };

inline SampleFormat parse_sample_format(std::string_view s) {
  if (s == "pcm16") return SampleFormat::pcm16;
  if (s == "float32") return SampleFormat::float32;
  throw InvalidParameter("unknown sample format: " + std::string(s));
}

/// Mono output. Samples beyond [-1, 1] are counted; PCM16 clips them, float32 stores them
/// as they are. NaN/inf is an error.
inline WavWriteReport write_wav(const AudioBuffer& buf, const std::filesystem::path& path,
                                SampleFormat format = SampleFormat::pcm16) {
  WavWriteReport rep;
  const std::uint16_t bytes_per_sample = format == SampleFormat::pcm16 ? 2 : 4;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(buf.samples.size() * bytes_per_sample);
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(buf.sample_rate));
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put32(out, 16);
  detail::put16(out, format == SampleFormat::pcm16 ? 1 : 3);
  detail::put16(out, 1);
  detail::put32(out, rate);
  detail::put32(out, rate * bytes_per_sample);
  detail::put16(out, bytes_per_sample);
  detail::put16(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
  out += "data";
  detail::put32(out, data_bytes);
  for (double s : buf.samples) {
    if (!std::isfinite(s)) throw InvalidParameter("write_wav: non-finite sample");
    if (s > 1.0 || s < -1.0) ++rep.clipped;
    if (format == SampleFormat::float32) {
      const float f = static_cast<float>(s);
      std::uint32_t u;
      std::memcpy(&u, &f, sizeof u);
      detail::put32(out, u);
      continue;
    }
    const double q = std::nearbyint(std::clamp(s, -1.0, 1.0) * 32768.0);
    const auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
    detail::put16(out, static_cast<std::uint16_t>(v));
  }
  detail::write_file_atomic(path, out);
  return rep;
}

}  // namespace sincfb
