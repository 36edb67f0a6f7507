#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "sing/losses.hpp"

namespace sing {

inline constexpr int kConfigSchemaVersion = 1;

enum class LossKind { kSpectral, kWaveform };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

struct EmbeddingDims {
  std::size_t velocity = 2;
  std::size_t instrument = 16;
  std::size_t pitch = 8;
  std::size_t time = 4;
};

/// Architecture hyperparameters. The decoder's transposed convolution with
/// kernel `kernel` and stride `stride` maps `seq_len` steps onto
/// raw_length() samples, which are trimmed symmetrically to signal_length.
struct ModelConfig {
  int sample_rate = 16000;
  std::size_t signal_length = 64000;
  std::size_t kernel = 1024;
  std::size_t stride = 256;
  std::size_t channels = 4096;
  std::size_t seq_dim = 128;
  std::size_t seq_len = 265;
  std::size_t decoder_kernel = 9;
  std::size_t lstm_hidden = 1024;
  std::size_t lstm_layers = 3;
  EmbeddingDims embed;
  std::size_t n_velocities = 5;
  std::size_t n_instruments = 1006;
  std::size_t n_pitches = 121;
  bool time_embedding = true;
  std::size_t loss_frame = 1024;
  std::size_t loss_hop = 256;
  double loss_epsilon = 1.0;
  std::uint64_t init_seed = 0;

  std::size_t raw_length() const { return (seq_len - 1) * stride + kernel; }
  std::size_t padding() const { return (raw_length() - signal_length) / 2; }
  std::size_t lstm_input() const {
    return embed.velocity + embed.instrument + embed.pitch + (time_embedding ? embed.time : 0);
  }
  losses::SpectralParams spectral() const { return {loss_frame, loss_hop, loss_epsilon}; }

  /// Throws invalid-argument when the geometry is inconsistent.
  void validate() const;
};

struct TrainConfig {
  LossKind loss = LossKind::kSpectral;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t epochs_autoencoder = 50;
  std::size_t epochs_lstm = 50;
  std::size_t epochs_finetune = 20;
  std::size_t tbptt_len = 32;
  bool tbptt_carry_state = true;
  double clip_norm = 5.0;  // stages 2 and 3; <= 0 disables
  std::uint64_t seed = 0;

  void validate() const;
};

struct DataConfig {
  std::uint64_t seed = 0;
  int pitch_offset = 0;  // MIDI note of pitch index 0
  double holdout_fraction = 0.10;
  double note_off_fraction = 0.75;  // release starts at this fraction of the note

  void validate() const;
};

struct SingConfig {
  int schema_version = kConfigSchemaVersion;
  std::string preset = "toy";
  ModelConfig model;
  TrainConfig train;
  DataConfig data;

  /// "paper" or "toy".
  static SingConfig preset_named(const std::string& name);
  void validate() const;
};

nlohmann::json to_json(const SingConfig& config);
/// Starts from the preset named in `j` ("toy" when absent) and applies every
/// field present in `j` on top. Unknown keys are rejected.
SingConfig config_from_json(const nlohmann::json& j);
SingConfig load_config(const std::filesystem::path& path);
void save_config(const SingConfig& config, const std::filesystem::path& path);

}  // namespace sing
