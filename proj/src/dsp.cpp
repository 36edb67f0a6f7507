#include "sing/dsp.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "sing/error.hpp"

namespace sing::dsp {

Waveform::Waveform(std::vector<double> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
  require(!samples_.empty(), "waveform must contain at least one sample");
  require(sample_rate_ > 0, "sample rate must be positive");
  for (double v : samples_) require(std::isfinite(v), "waveform contains a non-finite sample");
}

std::vector<double> hann_window(std::size_t size) {
  require(size >= 2, "hann window size must be >= 2, got " + std::to_string(size));
  std::vector<double> w(size);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(size);
  for (std::size_t n = 0; n < size; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(step * static_cast<double>(n)));
  }
  return w;
}

std::vector<double> overlap_add_profile(std::span<const double> window,
                                        std::size_t hop) {
  require(hop > 0 && window.size() % hop == 0,
          "window size must be divisible by hop");
  std::vector<double> profile(hop, 0.0);
  for (std::size_t phase = 0; phase < hop; ++phase) {
    for (std::size_t n = phase; n < window.size(); n += hop) profile[phase] += window[n];
  }
  return profile;
}

std::vector<double> cola_normalized_sq_hann(std::size_t size, std::size_t hop) {
  require(hop > 0 && size % hop == 0,
          "window size " + std::to_string(size) + " is not divisible by hop " +
              std::to_string(hop));
  std::vector<double> w = hann_window(size);
  for (double& v : w) v *= v;
  const std::vector<double> profile = overlap_add_profile(w, hop);
  // Exactly constant for size / hop >= 3; otherwise the mean is used.
  const double constant =
      std::accumulate(profile.begin(), profile.end(), 0.0) / static_cast<double>(hop);
  for (double& v : w) v /= constant;
  return w;
}

std::size_t frame_count(std::size_t length, std::size_t frame_size, std::size_t hop) {
  require(frame_size > 0 && hop > 0, "frame size and hop must be positive");
  require(length >= frame_size, "signal of length " + std::to_string(length) +
                                    " is shorter than frame size " +
                                    std::to_string(frame_size));
  return (length - frame_size) / hop + 1;
}

Matrix<double> frame(std::span<const double> x, std::size_t frame_size, std::size_t hop) {
  const std::size_t count = frame_count(x.size(), frame_size, hop);
  Matrix<double> out(count, frame_size);
  for (std::size_t k = 0; k < count; ++k) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(k * hop), frame_size,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * frame_size));
  }
  return out;
}

Matrix<double> frame(const Waveform& x, std::size_t frame_size, std::size_t hop) {
  return frame(x.samples(), frame_size, hop);
}

bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

void fft_inplace(std::span<Complex> a, bool inverse) {
  const std::size_t n = a.size();
  require(n >= 2 && is_power_of_two(n),
          "FFT length must be a power of two >= 2, got " + std::to_string(n));

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    // Twiddles evaluated directly rather than by recurrence to keep the
    // error at the 1e-15 level for long transforms.
    std::vector<Complex> twiddle(half);
    for (std::size_t k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) /
                           static_cast<double>(len);
      twiddle[k] = Complex(std::cos(angle), std::sin(angle));
    }
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * twiddle[k];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

std::vector<Complex> rfft(std::span<const double> frame) {
  const std::size_t n = frame.size();
  require(n >= 2 && is_power_of_two(n),
          "rfft length must be a power of two >= 2, got " + std::to_string(n));
  std::vector<Complex> buf(frame.begin(), frame.end());
  fft_inplace(buf);
  buf.resize(n / 2 + 1);
  return buf;
}

ComplexSpectrogram stft(std::span<const double> x, std::size_t frame_size,
                        std::size_t hop, std::span<const double> window) {
  require(window.size() == frame_size, "analysis window length must equal frame size");
  require(is_power_of_two(frame_size) && frame_size >= 2,
          "STFT frame size must be a power of two");
  const std::size_t count = frame_count(x.size(), frame_size, hop);
  const std::size_t bins = frame_size / 2 + 1;
  ComplexSpectrogram out;
  out.frame_size = frame_size;
  out.data = Matrix<Complex>(count, bins);
  std::vector<Complex> buf(frame_size);
  for (std::size_t k = 0; k < count; ++k) {
    const double* src = x.data() + k * hop;
    for (std::size_t n = 0; n < frame_size; ++n) buf[n] = Complex(src[n] * window[n], 0.0);
    fft_inplace(buf);
    std::copy_n(buf.begin(), bins, out.data.data.begin() + static_cast<std::ptrdiff_t>(k * bins));
  }
  return out;
}

ComplexSpectrogram stft(const Waveform& x, std::size_t frame_size, std::size_t hop,
                        std::span<const double> window) {
  return stft(x.samples(), frame_size, hop, window);
}

LogPowerSpectrogram log_power(const ComplexSpectrogram& s, double epsilon) {
  require(epsilon > 0.0, "log-power epsilon must be positive");
  LogPowerSpectrogram out;
  out.epsilon = epsilon;
  out.data = Matrix<double>(s.frames(), s.bins());
  for (std::size_t i = 0; i < s.data.data.size(); ++i) {
    out.data.data[i] = std::log(epsilon + std::norm(s.data.data[i]));
  }
  return out;
}

}  // namespace sing::dsp
