#pragma once

// Deterministic signal primitives: windows, framing, radix-2 FFT, STFT and
// log-power spectrograms. Everything here runs in 64-bit precision and is
// used both by the differentiable losses and as the reference path in tests.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sing::dsp {

using Complex = std::complex<double>;

/// Mono audio: samples nominally in [-1, 1] plus a sample rate in Hz.
class Waveform {
 public:
  Waveform() = default;
  /// Throws invalid-argument on empty input, non-finite samples or a
  /// non-positive sample rate.
  Waveform(std::vector<double> samples, int sample_rate);

  std::size_t size() const { return samples_.size(); }
  int sample_rate() const { return sample_rate_; }
  std::span<const double> samples() const { return samples_; }
  double operator[](std::size_t i) const { return samples_[i]; }

 private:
  std::vector<double> samples_;
  int sample_rate_ = 0;
};

/// Dense row-major matrix used for frames and spectrograms.
template <typename V>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<V> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c) {}

  V& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const V& operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<const V> row(std::size_t r) const {
    return std::span<const V>(data).subspan(r * cols, cols);
  }
};

/// frames x (frame_size/2 + 1) complex STFT coefficients.
struct ComplexSpectrogram {
  std::size_t frame_size = 0;
  Matrix<Complex> data;

  std::size_t frames() const { return data.rows; }
  std::size_t bins() const { return data.cols; }
};

/// Entrywise log(epsilon + |S|^2); every entry is >= log(epsilon).
struct LogPowerSpectrogram {
  double epsilon = 1.0;
  Matrix<double> data;

  std::size_t frames() const { return data.rows; }
  std::size_t bins() const { return data.cols; }
};

/// Periodic Hann window, w[n] = 0.5 (1 - cos(2 pi n / size)).
std::vector<double> hann_window(std::size_t size);

/// Sum of `window` shifted by multiples of `hop`, evaluated at each of the
/// `hop` phases of an interior output position. Constant for COLA windows.
std::vector<double> overlap_add_profile(std::span<const double> window,
                                        std::size_t hop);

/// Squared Hann window divided by its overlap-add constant at stride `hop`
/// (1.5 when size / hop == 4), so that shifted copies sum to exactly one.
std::vector<double> cola_normalized_sq_hann(std::size_t size, std::size_t hop);

/// Number of fully contained frames: floor((length - frame_size) / hop) + 1.
std::size_t frame_count(std::size_t length, std::size_t frame_size,
                        std::size_t hop);

/// Row k holds x[k*hop, k*hop + frame_size). No padding.
Matrix<double> frame(std::span<const double> x, std::size_t frame_size,
                     std::size_t hop);
Matrix<double> frame(const Waveform& x, std::size_t frame_size,
                     std::size_t hop);

bool is_power_of_two(std::size_t n);

/// In-place iterative radix-2 FFT. `inverse` flips the exponent sign; no
/// normalization is applied in either direction.
void fft_inplace(std::span<Complex> data, bool inverse = false);

/// Forward real FFT returning bins 0..L/2 of sum_n x[n] exp(-2 pi i m n / L).
std::vector<Complex> rfft(std::span<const double> frame);

ComplexSpectrogram stft(std::span<const double> x, std::size_t frame_size,
                        std::size_t hop, std::span<const double> window);
ComplexSpectrogram stft(const Waveform& x, std::size_t frame_size,
                        std::size_t hop, std::span<const double> window);

LogPowerSpectrogram log_power(const ComplexSpectrogram& s, double epsilon = 1.0);

}  // namespace sing::dsp
