#include "sing/model.hpp"

#include <cmath>

#include "sing/dsp.hpp"
#include "sing/error.hpp"

namespace sing::model {

std::string to_string(const NoteLabel& label) {
  return "(velocity " + std::to_string(label.velocity) + ", instrument " + std::to_string(label.instrument) +
         ", pitch " + std::to_string(label.pitch) + ")";
}

void validate_label(const NoteLabel& label, const ModelConfig& config) {
  if (label.velocity < config.n_velocities && label.instrument < config.n_instruments &&
      label.pitch < config.n_pitches)
    return;
  fail(ErrorKind::kInvalidArgument,
       "label " + to_string(label) + " out of range: velocity in [0, " + std::to_string(config.n_velocities) +
           "), instrument in [0, " + std::to_string(config.n_instruments) + "), pitch in [0, " +
           std::to_string(config.n_pitches) + ")");
}

namespace {

std::vector<double> synthesis_window(const ModelConfig& c) {
  return dsp::cola_normalized_sq_hann(c.kernel, c.stride);
}

const double kReluGain = std::sqrt(6.0);
const double kLinearGain = std::sqrt(3.0);
// The output layer starts near silence. From a loud random start the
// spectral loss is cut fastest by switching the ReLU stack off entirely.
const double kSynthGain = 0.01 * kLinearGain;

nn::Conv1dSpec pointwise(std::size_t in, std::size_t out, double gain) { return {in, out, 1, 1, true, {}, gain}; }

}  // namespace

template <typename T>
Encoder<T>::Encoder(const ModelConfig& c, nn::Initializer& init) : config_(c) {
  frame_ = nn::Conv1d<T>("encoder.frame", {1, c.channels, c.kernel, c.stride, true, synthesis_window(c), kReluGain},
                         init);
  mix1_ = nn::Conv1d<T>("encoder.mix1", pointwise(c.channels, c.channels, kReluGain), init);
  mix2_ = nn::Conv1d<T>("encoder.mix2", pointwise(c.channels, c.channels, kReluGain), init);
  project_ = nn::Conv1d<T>("encoder.project", pointwise(c.channels, c.seq_dim, kLinearGain), init);
}

template <typename T>
Var<T> Encoder<T>::forward(const Var<T>& x) const {
  require(x.value().rank() == 2 && x.dim(0) == 1 && x.dim(1) == config_.signal_length,
          "encoder expects a 1 x " + std::to_string(config_.signal_length) + " waveform, got " +
              shape_string(x.shape()));
  const std::size_t pad = config_.padding();
  Var<T> h = grad::relu(frame_.forward(grad::pad_cols(x, pad, pad)));
  h = grad::relu(mix1_.forward(h));
  h = grad::relu(mix2_.forward(h));
  return project_.forward(h);
}

template <typename T>
void Encoder<T>::collect(ParameterList<T>& out) {
  frame_.collect(out);
  mix1_.collect(out);
  mix2_.collect(out);
  project_.collect(out);
}

template <typename T>
Decoder<T>::Decoder(const ModelConfig& c, nn::Initializer& init) : config_(c) {
  context_ =
      nn::Conv1d<T>("decoder.context", {c.seq_dim, c.channels, c.decoder_kernel, 1, true, {}, kReluGain}, init);
  mix1_ = nn::Conv1d<T>("decoder.mix1", pointwise(c.channels, c.channels, kReluGain), init);
  mix2_ = nn::Conv1d<T>("decoder.mix2", pointwise(c.channels, c.channels, kReluGain), init);
  synth_ = nn::ConvTranspose1d<T>(
      "decoder.synth", {c.channels, 1, c.kernel, c.stride, true, synthesis_window(c), kSynthGain}, init);
}

template <typename T>
Var<T> Decoder<T>::forward(const Var<T>& s) const {
  require(s.value().rank() == 2 && s.dim(0) == config_.seq_dim && s.dim(1) == config_.seq_len,
          "decoder expects a " + std::to_string(config_.seq_dim) + " x " + std::to_string(config_.seq_len) +
              " sequence, got " + shape_string(s.shape()));
  const std::size_t same = config_.decoder_kernel / 2;
  Var<T> h = grad::relu(context_.forward(grad::pad_cols(s, same, same)));
  h = grad::relu(mix1_.forward(h));
  h = grad::relu(mix2_.forward(h));
  Var<T> raw = synth_.forward(h);
  const std::size_t pad = config_.padding();
  return grad::slice(raw, 1, pad, pad + config_.signal_length);
}

template <typename T>
void Decoder<T>::collect(ParameterList<T>& out) {
  context_.collect(out);
  mix1_.collect(out);
  mix2_.collect(out);
  synth_.collect(out);
}

template <typename T>
SequenceGenerator<T>::SequenceGenerator(const ModelConfig& c, nn::Initializer& init) : config_(c) {
  velocity_ = nn::Embedding<T>("generator.velocity", c.n_velocities, c.embed.velocity, init);
  instrument_ = nn::Embedding<T>("generator.instrument", c.n_instruments, c.embed.instrument, init);
  pitch_ = nn::Embedding<T>("generator.pitch", c.n_pitches, c.embed.pitch, init);
  // Drawn even when disabled so the ablation shares every other initial value.
  time_ = nn::Embedding<T>("generator.time", c.seq_len, c.embed.time, init);
  lstm_ = nn::LstmStack<T>("generator.lstm", c.lstm_input(), c.lstm_hidden, c.lstm_layers, init);
  output_ = nn::Linear<T>("generator.output", c.lstm_hidden, c.seq_dim, init);
}

template <typename T>
Var<T> SequenceGenerator<T>::inputs(const NoteLabel& label) const {
  validate_label(label, config_);
  const std::size_t n = config_.seq_len;
  std::vector<Var<T>> rows = {
      grad::repeat_cols(velocity_.lookup(label.velocity), n),
      grad::repeat_cols(instrument_.lookup(label.instrument), n),
      grad::repeat_cols(pitch_.lookup(label.pitch), n),
  };
  if (config_.time_embedding) rows.push_back(grad::transpose(time_.table()));
  return grad::concat(rows, 0);
}

template <typename T>
SegmentOutput<T> SequenceGenerator<T>::forward_segment(const Var<T>& inputs, std::size_t begin, std::size_t end,
                                                       std::vector<nn::LstmState<T>> initial) const {
  require(begin < end && end <= inputs.dim(1), "sequence segment out of range");
  auto result = lstm_.forward(grad::slice(inputs, 1, begin, end), std::move(initial));
  return {output_.forward(result.outputs), std::move(result.states)};
}

template <typename T>
Var<T> SequenceGenerator<T>::forward(const NoteLabel& label) const {
  return forward_segment(inputs(label), 0, config_.seq_len, {}).sequence;
}

template <typename T>
void SequenceGenerator<T>::collect(ParameterList<T>& out) {
  velocity_.collect(out);
  instrument_.collect(out);
  pitch_.collect(out);
  if (config_.time_embedding) time_.collect(out);
  lstm_.collect(out);
  output_.collect(out);
}

template <typename T>
SingModel<T>::SingModel(const ModelConfig& config, bool with_encoder)
    : config_(config), has_encoder_(with_encoder) {
  config_.validate();
  nn::Initializer init(config_.init_seed);
  if (with_encoder) {
    encoder_ = Encoder<T>(config_, init);
  } else {
    // Keep the decoder and generator draws identical to a full model.
    Encoder<T> discard(config_, init);
  }
  decoder_ = Decoder<T>(config_, init);
  generator_ = SequenceGenerator<T>(config_, init);
}

template <typename T>
Var<T> SingModel<T>::encode(const Var<T>& waveform) const {
  if (!has_encoder_) fail(ErrorKind::kInvalidState, "model was built without an encoder");
  return encoder_.forward(waveform);
}

template <typename T>
Var<T> SingModel<T>::generate(const NoteLabel& label) const {
  return generator_.forward(label);
}

template <typename T>
ParameterList<T> SingModel<T>::encoder_parameters() {
  ParameterList<T> out;
  if (has_encoder_) encoder_.collect(out);
  return out;
}

template <typename T>
ParameterList<T> SingModel<T>::decoder_parameters() {
  ParameterList<T> out;
  decoder_.collect(out);
  return out;
}

template <typename T>
ParameterList<T> SingModel<T>::generator_parameters() {
  ParameterList<T> out;
  generator_.collect(out);
  return out;
}

template <typename T>
ParameterList<T> SingModel<T>::parameters() {
  ParameterList<T> out = encoder_parameters();
  for (auto* p : decoder_parameters()) out.push_back(p);
  for (auto* p : generator_parameters()) out.push_back(p);
  return out;
}

template <typename T>
ParameterCounts SingModel<T>::count_parameters() {
  auto total = [](const ParameterList<T>& list) {
    std::size_t n = 0;
    for (const auto* p : list) n += p->size();
    return n;
  };
  ParameterCounts c;
  c.groups["encoder"] = total(encoder_parameters());
  c.groups["decoder"] = total(decoder_parameters());
  c.groups["generator"] = total(generator_parameters());
  c.deployed = c.groups["decoder"] + c.groups["generator"];
  c.total = c.deployed + c.groups["encoder"];
  return c;
}

ParameterCounts analytic_parameter_count(const ModelConfig& m) {
  const std::size_t C = m.channels, D = m.seq_dim, K = m.kernel, H = m.lstm_hidden;
  const std::size_t pointwise_cc = C * C + C;
  ParameterCounts c;
  c.groups["encoder"] = (C * K + C) + 2 * pointwise_cc + (C * D + D);
  c.groups["decoder"] = (D * C * m.decoder_kernel + C) + 2 * pointwise_cc + (C * K + 1);
  std::size_t lstm = 0;
  for (std::size_t l = 0; l < m.lstm_layers; ++l) {
    const std::size_t in = l == 0 ? m.lstm_input() : H;
    lstm += 4 * H * (in + H) + 4 * H;
  }
  std::size_t embeddings = m.n_velocities * m.embed.velocity + m.n_instruments * m.embed.instrument +
                           m.n_pitches * m.embed.pitch;
  if (m.time_embedding) embeddings += m.seq_len * m.embed.time;
  c.groups["generator"] = embeddings + lstm + (H * D + D);
  c.deployed = c.groups["decoder"] + c.groups["generator"];
  c.total = c.deployed + c.groups["encoder"];
  return c;
}

template <typename T>
Tensor<T> waveform_tensor(const dsp::Waveform& w) {
  Tensor<T> t({1, w.size()});
  for (std::size_t i = 0; i < w.size(); ++i) t[i] = static_cast<T>(w[i]);
  return t;
}

namespace {
template <typename T>
dsp::Waveform tensor_to_waveform(const Tensor<T>& t, int sample_rate) {
  std::vector<double> samples(t.values().begin(), t.values().end());
  return dsp::Waveform(std::move(samples), sample_rate);
}
}  // namespace

dsp::Waveform to_waveform(const Tensor<float>& t, int sample_rate) { return tensor_to_waveform(t, sample_rate); }
dsp::Waveform to_waveform(const Tensor<double>& t, int sample_rate) { return tensor_to_waveform(t, sample_rate); }

#define SING_INSTANTIATE(T)                                 \
  template class Encoder<T>;                                \
  template class Decoder<T>;                                \
  template class SequenceGenerator<T>;                      \
  template class SingModel<T>;                              \
  template Tensor<T> waveform_tensor<T>(const dsp::Waveform&);

SING_INSTANTIATE(float)
SING_INSTANTIATE(double)

#undef SING_INSTANTIATE

}  // namespace sing::model
