#pragma once

// The SING architecture: a convolutional encoder/decoder pair over raw
// waveforms and an LSTM that generates the decoder's input sequence from
// (velocity, instrument, pitch) embeddings plus a per-step time embedding.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sing/config.hpp"
#include "sing/nn.hpp"

namespace sing::model {

using grad::Parameter;
using grad::ParameterList;
using grad::Var;

struct NoteLabel {
  std::size_t velocity = 0;
  std::size_t instrument = 0;
  std::size_t pitch = 0;

  auto operator<=>(const NoteLabel&) const = default;
};

std::string to_string(const NoteLabel& label);

/// Throws invalid-argument naming the valid ranges.
void validate_label(const NoteLabel& label, const ModelConfig& config);

/// 1 x signal_length waveform -> D x N sequence.
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& config, nn::Initializer& init);

  Var<T> forward(const Var<T>& waveform) const;
  void collect(ParameterList<T>& out);

 private:
  ModelConfig config_;
  nn::Conv1d<T> frame_;
  nn::Conv1d<T> mix1_;
  nn::Conv1d<T> mix2_;
  nn::Conv1d<T> project_;
};

/// D x N sequence -> 1 x signal_length waveform.
template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const ModelConfig& config, nn::Initializer& init);

  Var<T> forward(const Var<T>& sequence) const;
  void collect(ParameterList<T>& out);

 private:
  ModelConfig config_;
  nn::Conv1d<T> context_;
  nn::Conv1d<T> mix1_;
  nn::Conv1d<T> mix2_;
  nn::ConvTranspose1d<T> synth_;
};

template <typename T>
struct SegmentOutput {
  Var<T> sequence;                        // D x (end - begin)
  std::vector<nn::LstmState<T>> states;   // per layer, after the segment
};

/// Label -> D x N sequence. Non-autoregressive: every step sees the same
/// label embeddings plus its own time embedding.
template <typename T>
class SequenceGenerator {
 public:
  SequenceGenerator() = default;
  SequenceGenerator(const ModelConfig& config, nn::Initializer& init);

  /// In x N LSTM input for `label`.
  Var<T> inputs(const NoteLabel& label) const;
  Var<T> forward(const NoteLabel& label) const;
  /// Runs steps [begin, end) of `inputs` from `initial` (empty: zero state).
  SegmentOutput<T> forward_segment(const Var<T>& inputs, std::size_t begin, std::size_t end,
                                   std::vector<nn::LstmState<T>> initial) const;

  std::size_t input_width() const { return config_.lstm_input(); }
  void collect(ParameterList<T>& out);

 private:
  ModelConfig config_;
  nn::Embedding<T> velocity_;
  nn::Embedding<T> instrument_;
  nn::Embedding<T> pitch_;
  nn::Embedding<T> time_;
  nn::LstmStack<T> lstm_;
  nn::Linear<T> output_;
};

struct ParameterCounts {
  std::map<std::string, std::size_t> groups;  // "encoder", "decoder", "generator"
  std::size_t total = 0;
  std::size_t deployed = 0;  // decoder + generator; the encoder only initialises training

  std::size_t deployed_bytes() const { return deployed * 4; }
};

/// Closed-form count from the configuration alone.
ParameterCounts analytic_parameter_count(const ModelConfig& config);

template <typename T>
class SingModel {
 public:
  /// Parameters are drawn from config.init_seed in a fixed order
  /// (encoder, decoder, generator). `with_encoder = false` skips the
  /// encoder, leaving only the deployed synthesizer.
  explicit SingModel(const ModelConfig& config, bool with_encoder = true);
  SingModel(const SingModel&) = delete;
  SingModel& operator=(const SingModel&) = delete;

  const ModelConfig& config() const { return config_; }
  bool has_encoder() const { return has_encoder_; }

  Var<T> encode(const Var<T>& waveform) const;
  Var<T> decode(const Var<T>& sequence) const { return decoder_.forward(sequence); }
  Var<T> autoencode(const Var<T>& waveform) const { return decode(encode(waveform)); }
  Var<T> generate(const NoteLabel& label) const;
  Var<T> synthesize(const NoteLabel& label) const { return decode(generate(label)); }

  const SequenceGenerator<T>& generator() const { return generator_; }

  ParameterList<T> encoder_parameters();
  ParameterList<T> decoder_parameters();
  ParameterList<T> generator_parameters();
  ParameterList<T> parameters();

  ParameterCounts count_parameters();

 private:
  ModelConfig config_;
  bool has_encoder_ = true;
  Encoder<T> encoder_;
  Decoder<T> decoder_;
  SequenceGenerator<T> generator_;
};

/// Waveform samples as a 1 x L tensor.
template <typename T>
Tensor<T> waveform_tensor(const dsp::Waveform& w);
dsp::Waveform to_waveform(const Tensor<float>& t, int sample_rate);
dsp::Waveform to_waveform(const Tensor<double>& t, int sample_rate);

}  // namespace sing::model
