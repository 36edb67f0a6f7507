#include "sing/config.hpp"

#include <fstream>
#include <set>

#include "sing/error.hpp"

namespace sing {

using nlohmann::json;

std::string to_string(LossKind kind) {
  return kind == LossKind::kSpectral ? "spectral" : "waveform";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "spectral") return LossKind::kSpectral;
  if (name == "waveform") return LossKind::kWaveform;
  fail(ErrorKind::kInvalidInput, "unknown loss '" + name + "' (expected spectral or waveform)");
}

void ModelConfig::validate() const {
  require(sample_rate > 0, "sample_rate must be positive");
  require(signal_length > 0 && kernel > 0 && stride > 0 && seq_len > 0, "model sizes must be positive");
  require(channels > 0 && seq_dim > 0 && lstm_hidden > 0 && lstm_layers > 0, "model widths must be positive");
  require(kernel % stride == 0 && kernel / stride == 4,
          "kernel must be exactly 4x the stride for the overlap-add window");
  require(raw_length() >= signal_length,
          "decoder output (" + std::to_string(raw_length()) + " samples) does not cover signal_length " +
              std::to_string(signal_length));
  require((raw_length() - signal_length) % 2 == 0, "padding must split evenly between both sides");
  require(decoder_kernel % 2 == 1, "decoder kernel must be odd for same padding");
  require(n_velocities > 0 && n_instruments > 0 && n_pitches > 0, "vocabulary sizes must be positive");
  require(embed.velocity > 0 && embed.instrument > 0 && embed.pitch > 0 && embed.time > 0,
          "embedding widths must be positive");
  require(loss_frame >= 2 && (loss_frame & (loss_frame - 1)) == 0, "loss_frame must be a power of two");
  require(loss_hop > 0 && loss_frame <= signal_length, "loss STFT geometry does not fit the signal");
  require(loss_epsilon > 0.0, "loss_epsilon must be positive");
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must be in [0, 1)");
  require(adam_epsilon > 0.0, "adam_epsilon must be positive");
  require(batch_size > 0, "batch_size must be positive");
  require(tbptt_len > 0, "tbptt_len must be positive");
}

void DataConfig::validate() const {
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0, "holdout_fraction must be in (0, 1)");
  require(note_off_fraction > 0.0 && note_off_fraction <= 1.0, "note_off_fraction must be in (0, 1]");
}

void SingConfig::validate() const {
  require(schema_version == kConfigSchemaVersion,
          "unsupported config schema_version " + std::to_string(schema_version));
  model.validate();
  train.validate();
  data.validate();
}

SingConfig SingConfig::preset_named(const std::string& name) {
  SingConfig c;
  c.preset = name;
  if (name == "paper") return c;
  if (name != "toy") fail(ErrorKind::kInvalidInput, "unknown preset '" + name + "' (expected paper or toy)");

  ModelConfig& m = c.model;
  m.sample_rate = 4000;
  m.signal_length = 8192;
  m.kernel = 256;
  m.stride = 64;
  m.channels = 64;
  m.seq_dim = 16;
  m.seq_len = 129;  // (129 - 1) * 64 + 256 = 8448 = 8192 + 2 * 128
  m.lstm_hidden = 64;
  m.lstm_layers = 2;
  m.embed = {2, 8, 4, 2};
  m.n_velocities = 2;
  m.n_instruments = 4;
  m.n_pitches = 16;
  m.loss_frame = 256;
  m.loss_hop = 64;

  TrainConfig& t = c.train;
  t.learning_rate = 1e-3;
  t.batch_size = 4;
  t.epochs_autoencoder = 100;
  t.epochs_lstm = 60;
  t.epochs_finetune = 200;

  c.data.pitch_offset = 48;
  return c;
}

json to_json(const SingConfig& c) {
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  const DataConfig& d = c.data;
  return json{
      {"schema_version", c.schema_version},
      {"preset", c.preset},
      {"model",
       {{"sample_rate", m.sample_rate},
        {"signal_length", m.signal_length},
        {"kernel", m.kernel},
        {"stride", m.stride},
        {"channels", m.channels},
        {"seq_dim", m.seq_dim},
        {"seq_len", m.seq_len},
        {"decoder_kernel", m.decoder_kernel},
        {"lstm_hidden", m.lstm_hidden},
        {"lstm_layers", m.lstm_layers},
        {"embed",
         {{"velocity", m.embed.velocity},
          {"instrument", m.embed.instrument},
          {"pitch", m.embed.pitch},
          {"time", m.embed.time}}},
        {"n_velocities", m.n_velocities},
        {"n_instruments", m.n_instruments},
        {"n_pitches", m.n_pitches},
        {"time_embedding", m.time_embedding},
        {"loss_frame", m.loss_frame},
        {"loss_hop", m.loss_hop},
        {"loss_epsilon", m.loss_epsilon},
        {"init_seed", m.init_seed}}},
      {"train",
       {{"loss", to_string(t.loss)},
        {"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"adam_epsilon", t.adam_epsilon},
        {"batch_size", t.batch_size},
        {"epochs_autoencoder", t.epochs_autoencoder},
        {"epochs_lstm", t.epochs_lstm},
        {"epochs_finetune", t.epochs_finetune},
        {"tbptt_len", t.tbptt_len},
        {"tbptt_carry_state", t.tbptt_carry_state},
        {"clip_norm", t.clip_norm},
        {"seed", t.seed}}},
      {"data",
       {{"seed", d.seed},
        {"pitch_offset", d.pitch_offset},
        {"holdout_fraction", d.holdout_fraction},
        {"note_off_fraction", d.note_off_fraction}}},
  };
}

namespace {

// Reads `key` into `out` when present, rejecting keys not in `known`.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(ErrorKind::kInvalidInput, where_ + " must be a JSON object");
  }

  template <typename V>
  void get(const char* key, V& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->get<V>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kInvalidInput, where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(ErrorKind::kInvalidInput, "unknown config key " + where_ + "." + it.key());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

SingConfig config_from_json(const json& j) {
  Reader root(j, "config");
  std::string preset = "toy";
  root.get("preset", preset);
  SingConfig c = SingConfig::preset_named(preset);
  root.get("schema_version", c.schema_version);

  if (const json* mj = root.child("model")) {
    ModelConfig& m = c.model;
    Reader r(*mj, "model");
    r.get("sample_rate", m.sample_rate);
    r.get("signal_length", m.signal_length);
    r.get("kernel", m.kernel);
    r.get("stride", m.stride);
    r.get("channels", m.channels);
    r.get("seq_dim", m.seq_dim);
    r.get("seq_len", m.seq_len);
    r.get("decoder_kernel", m.decoder_kernel);
    r.get("lstm_hidden", m.lstm_hidden);
    r.get("lstm_layers", m.lstm_layers);
    if (const json* ej = r.child("embed")) {
      Reader e(*ej, "model.embed");
      e.get("velocity", m.embed.velocity);
      e.get("instrument", m.embed.instrument);
      e.get("pitch", m.embed.pitch);
      e.get("time", m.embed.time);
      e.finish();
    }
    r.get("n_velocities", m.n_velocities);
    r.get("n_instruments", m.n_instruments);
    r.get("n_pitches", m.n_pitches);
    r.get("time_embedding", m.time_embedding);
    r.get("loss_frame", m.loss_frame);
    r.get("loss_hop", m.loss_hop);
    r.get("loss_epsilon", m.loss_epsilon);
    r.get("init_seed", m.init_seed);
    r.finish();
  }
  if (const json* tj = root.child("train")) {
    TrainConfig& t = c.train;
    Reader r(*tj, "train");
    std::string loss = to_string(t.loss);
    r.get("loss", loss);
    t.loss = loss_kind_from_string(loss);
    r.get("learning_rate", t.learning_rate);
    r.get("beta1", t.beta1);
    r.get("beta2", t.beta2);
    r.get("adam_epsilon", t.adam_epsilon);
    r.get("batch_size", t.batch_size);
    r.get("epochs_autoencoder", t.epochs_autoencoder);
    r.get("epochs_lstm", t.epochs_lstm);
    r.get("epochs_finetune", t.epochs_finetune);
    r.get("tbptt_len", t.tbptt_len);
    r.get("tbptt_carry_state", t.tbptt_carry_state);
    r.get("clip_norm", t.clip_norm);
    r.get("seed", t.seed);
    r.finish();
  }
  if (const json* dj = root.child("data")) {
    DataConfig& d = c.data;
    Reader r(*dj, "data");
    r.get("seed", d.seed);
    r.get("pitch_offset", d.pitch_offset);
    r.get("holdout_fraction", d.holdout_fraction);
    r.get("note_off_fraction", d.note_off_fraction);
    r.finish();
  }
  root.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kInvalidInput, std::string("invalid config: ") + e.what());
  }
  return c;
}

SingConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kInvalidInput, "malformed config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

void save_config(const SingConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write config " + path.string());
  out << to_json(config).dump(2) << "\n";
  if (!out) fail(ErrorKind::kIo, "failed writing config " + path.string());
}

}  // namespace sing
