#pragma once

// Training objectives (waveform MSE, log-power spectral L1, embedding MSE)
// and the Itakura-Saito evaluation divergence. All reductions are means.

#include <cstddef>

#include "sing/dsp.hpp"
#include "sing/grad.hpp"

namespace sing::losses {

using grad::Var;

struct SpectralParams {
  std::size_t frame_size = 1024;
  std::size_t hop = 256;
  double epsilon = 1.0;
};

// Evaluation (64-bit, no graph).
double waveform_mse(const dsp::Waveform& x, const dsp::Waveform& x_hat);
double spectral_loss(const dsp::Waveform& x, const dsp::Waveform& x_hat,
                     const SpectralParams& params = {});
/// Mean of P/P^ - log(P/P^) - 1 over STFT entries, P = |STFT x|^2 + floor.
double itakura_saito(const dsp::Waveform& x, const dsp::Waveform& x_hat,
                     const SpectralParams& params = {}, double floor = 1e-8);

// Differentiable versions. Signals are flat tensors (1 x L).
template <typename T>
Var<T> waveform_mse(const Var<T>& x, const Var<T>& x_hat);

/// log(epsilon + |STFT x|^2) as a frames x bins node.
template <typename T>
Var<T> log_spectrogram(const Var<T>& x, const SpectralParams& params);

template <typename T>
Var<T> spectral_loss(const Var<T>& x, const Var<T>& x_hat, const SpectralParams& params);

template <typename T>
Var<T> embedding_mse(const Var<T>& s, const Var<T>& e);

}  // namespace sing::losses
