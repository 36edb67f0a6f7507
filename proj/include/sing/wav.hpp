#pragma once

// 16-bit PCM mono WAV files. Samples map to integers as round(clamp(v) * 32767)
// and back as n / 32767, so -1 and 1 both survive a round trip.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sing/dsp.hpp"

namespace sing::wav {

inline constexpr double kScale = 32767.0;

std::int16_t quantize(double v);

std::vector<std::uint8_t> encode(const dsp::Waveform& x);
/// Throws parse-error for malformed containers and unsupported-format for
/// anything but uncompressed 16-bit mono PCM.
dsp::Waveform decode(std::span<const std::uint8_t> bytes);

void write_wav(const dsp::Waveform& x, const std::filesystem::path& path);
dsp::Waveform read_wav(const std::filesystem::path& path);

}  // namespace sing::wav
