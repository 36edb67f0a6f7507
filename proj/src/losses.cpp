#include "sing/losses.hpp"

#include <cmath>
#include <string>

#include "sing/ops.hpp"

namespace sing::losses {

namespace {

void require_same_length(const dsp::Waveform& x, const dsp::Waveform& y, const char* what) {
  require(x.size() == y.size(), std::string(what) + ": length mismatch " +
                                    std::to_string(x.size()) + " vs " + std::to_string(y.size()));
}

dsp::Matrix<double> power_spectrogram(const dsp::Waveform& x, const SpectralParams& p) {
  const auto window = dsp::hann_window(p.frame_size);
  const auto s = dsp::stft(x, p.frame_size, p.hop, window);
  dsp::Matrix<double> out(s.frames(), s.bins());
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = std::norm(s.data.data[i]);
  return out;
}

}  // namespace

double waveform_mse(const dsp::Waveform& x, const dsp::Waveform& x_hat) {
  require_same_length(x, x_hat, "waveform_mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x_hat[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double spectral_loss(const dsp::Waveform& x, const dsp::Waveform& x_hat, const SpectralParams& p) {
  require_same_length(x, x_hat, "spectral_loss");
  const auto window = dsp::hann_window(p.frame_size);
  const auto lx = dsp::log_power(dsp::stft(x, p.frame_size, p.hop, window), p.epsilon);
  const auto ly = dsp::log_power(dsp::stft(x_hat, p.frame_size, p.hop, window), p.epsilon);
  double acc = 0.0;
  for (std::size_t i = 0; i < lx.data.data.size(); ++i) acc += std::abs(lx.data.data[i] - ly.data.data[i]);
  return acc / static_cast<double>(lx.data.data.size());
}

double itakura_saito(const dsp::Waveform& x, const dsp::Waveform& x_hat, const SpectralParams& p,
                     double floor) {
  require_same_length(x, x_hat, "itakura_saito");
  require(floor > 0.0, "itakura_saito floor must be positive");
  const auto px = power_spectrogram(x, p);
  const auto py = power_spectrogram(x_hat, p);
  double acc = 0.0;
  for (std::size_t i = 0; i < px.data.size(); ++i) {
    const double ratio = (px.data[i] + floor) / (py.data[i] + floor);
    acc += ratio - std::log(ratio) - 1.0;
  }
  return acc / static_cast<double>(px.data.size());
}

template <typename T>
Var<T> waveform_mse(const Var<T>& x, const Var<T>& x_hat) {
  require(x.size() == x_hat.size(), "waveform_mse: length mismatch " + std::to_string(x.size()) +
                                        " vs " + std::to_string(x_hat.size()));
  return grad::mean(grad::square(grad::sub(x, x_hat)));
}

template <typename T>
Var<T> log_spectrogram(const Var<T>& x, const SpectralParams& p) {
  require(p.epsilon > 0.0, "spectral epsilon must be positive");
  const auto window = dsp::hann_window(p.frame_size);
  return grad::log(grad::add_scalar(grad::power(grad::stft(x, p.frame_size, p.hop, window)),
                                    static_cast<T>(p.epsilon)));
}

template <typename T>
Var<T> spectral_loss(const Var<T>& x, const Var<T>& x_hat, const SpectralParams& p) {
  require(x.size() == x_hat.size(), "spectral_loss: length mismatch " + std::to_string(x.size()) +
                                        " vs " + std::to_string(x_hat.size()));
  require(x.size() >= p.frame_size, "spectral_loss: input shorter than one frame");
  return grad::mean(grad::abs(grad::sub(log_spectrogram(x, p), log_spectrogram(x_hat, p))));
}

template <typename T>
Var<T> embedding_mse(const Var<T>& s, const Var<T>& e) {
  require(s.shape() == e.shape(), "embedding_mse: shape mismatch " + shape_string(s.shape()) +
                                      " vs " + shape_string(e.shape()));
  return grad::mean(grad::square(grad::sub(s, e)));
}

template Var<float> waveform_mse(const Var<float>&, const Var<float>&);
template Var<double> waveform_mse(const Var<double>&, const Var<double>&);
template Var<float> log_spectrogram(const Var<float>&, const SpectralParams&);
template Var<double> log_spectrogram(const Var<double>&, const SpectralParams&);
template Var<float> spectral_loss(const Var<float>&, const Var<float>&, const SpectralParams&);
template Var<double> spectral_loss(const Var<double>&, const Var<double>&, const SpectralParams&);
template Var<float> embedding_mse(const Var<float>&, const Var<float>&);
template Var<double> embedding_mse(const Var<double>&, const Var<double>&);

}  // namespace sing::losses
