#include "sing/wav.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>

#include "sing/error.hpp"

namespace sing::wav {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::equal(tag, tag + 4, b.begin() + static_cast<std::ptrdiff_t>(at));
}

struct Format {
  std::uint16_t code = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

std::int16_t quantize(double v) {
  return static_cast<std::int16_t>(std::lround(std::clamp(v, -1.0, 1.0) * kScale));
}

std::vector<std::uint8_t> encode(const dsp::Waveform& x) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(x.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(x.sample_rate()) * 2);  // byte rate
  put_u16(out, 2);                                                // block align
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double v : x.samples()) put_u16(out, static_cast<std::uint16_t>(quantize(v)));
  return out;
}

dsp::Waveform decode(std::span<const std::uint8_t> b) {
  if (b.size() < 12) fail(ErrorKind::kParse, "truncated WAV: missing RIFF header");
  if (!tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE")) fail(ErrorKind::kParse, "not a RIFF/WAVE file");

  std::optional<Format> format;
  std::optional<std::span<const std::uint8_t>> data;
  std::size_t at = 12;
  while (at + 8 <= b.size()) {
    const std::uint32_t size = get_u32(b, at + 4);
    const std::size_t body = at + 8;
    const bool is_fmt = tag_is(b, at, "fmt ");
    const bool is_data = tag_is(b, at, "data");
    if (body + size > b.size()) {
      const std::string name(b.begin() + static_cast<std::ptrdiff_t>(at), b.begin() + static_cast<std::ptrdiff_t>(at + 4));
      fail(ErrorKind::kParse, "truncated WAV: '" + name + "' chunk declares " + std::to_string(size) +
                                  " bytes but only " + std::to_string(b.size() - body) + " remain");
    }
    if (is_fmt) {
      if (size < 16) fail(ErrorKind::kParse, "malformed WAV: 'fmt ' chunk is " + std::to_string(size) + " bytes");
      format = Format{get_u16(b, body), get_u16(b, body + 2), get_u32(b, body + 4), get_u16(b, body + 14)};
    } else if (is_data) {
      data = b.subspan(body, size);
    }
    at = body + size + (size & 1);  // chunks are word aligned
  }
  if (!format) fail(ErrorKind::kParse, "truncated WAV: missing 'fmt ' chunk");
  if (!data) fail(ErrorKind::kParse, "truncated WAV: missing 'data' chunk");

  if (format->code != 1) {
    fail(ErrorKind::kUnsupportedFormat,
         "unsupported WAV format code " + std::to_string(format->code) + " (only PCM, code 1)");
  }
  if (format->channels != 1) {
    fail(ErrorKind::kUnsupportedFormat,
         "unsupported WAV channel count " + std::to_string(format->channels) + " (only mono)");
  }
  if (format->bits != 16) {
    fail(ErrorKind::kUnsupportedFormat,
         "unsupported WAV sample width " + std::to_string(format->bits) + " bits (only 16)");
  }
  if (format->sample_rate == 0) fail(ErrorKind::kParse, "malformed WAV: sample rate 0");
  if (data->size() % 2 != 0) fail(ErrorKind::kParse, "malformed WAV: odd 'data' chunk size");
  if (data->empty()) fail(ErrorKind::kParse, "WAV 'data' chunk holds no samples");

  std::vector<double> samples(data->size() / 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i] = static_cast<std::int16_t>(get_u16(*data, 2 * i)) / kScale;
  }
  return dsp::Waveform(std::move(samples), static_cast<int>(format->sample_rate));
}

void write_wav(const dsp::Waveform& x, const std::filesystem::path& path) {
  const auto bytes = encode(x);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

dsp::Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode(bytes);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace sing::wav
