#include "sing/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <cstdio>

#include "sing/error.hpp"
#include "sing/wav.hpp"

namespace sing::data {

using nlohmann::json;

double midi_to_freq(int pitch) {
  require(pitch >= 0 && pitch <= 120, "MIDI pitch " + std::to_string(pitch) + " outside [0, 120]");
  return 440.0 * std::pow(2.0, (pitch - 69) / 12.0);
}

const std::vector<InstrumentSpec>& toy_instrument_bank() {
  static const std::vector<InstrumentSpec> bank = [] {
    std::vector<InstrumentSpec> b;
    b.push_back({"sine", {1.0}, {1.0}, {0.02, 0.10, 0.8, 0.20}});

    InstrumentSpec saw{"saw", {}, {}, {0.01, 0.20, 0.6, 0.30}};
    for (int k = 1; k <= 8; ++k) {
      saw.partials.push_back(k);
      saw.amplitudes.push_back(1.0 / k);
    }
    b.push_back(saw);

    InstrumentSpec clarinet{"clarinet", {}, {}, {0.05, 0.05, 0.9, 0.10}};
    for (int k = 1; k <= 15; k += 2) {
      clarinet.partials.push_back(k);
      clarinet.amplitudes.push_back(1.0 / k);
    }
    b.push_back(clarinet);

    InstrumentSpec bell{"bell", {}, {}, {0.002, 0.60, 0.0, 0.10}};
    for (int k = 1; k <= 8; ++k) {
      bell.partials.push_back(std::pow(k, 1.02));
      bell.amplitudes.push_back(1.0 / k);
    }
    b.push_back(bell);
    return b;
  }();
  return bank;
}

const InstrumentSpec& instrument_spec(std::size_t instrument) {
  const auto& bank = toy_instrument_bank();
  return bank[instrument % bank.size()];
}

double velocity_amplitude(std::size_t velocity, std::size_t n_velocities) {
  require(velocity < n_velocities, "velocity index out of range");
  return static_cast<double>(velocity + 1) / static_cast<double>(n_velocities);
}

double envelope_at(const Envelope& env, double t, double note_off) {
  auto held = [&](double u) {
    if (u < env.attack) return u / env.attack;
    u -= env.attack;
    if (u < env.decay) return 1.0 - (1.0 - env.sustain) * (u / env.decay);
    return env.sustain;
  };
  if (t < note_off) return held(t);
  if (env.release <= 0.0) return 0.0;
  const double r = (t - note_off) / env.release;
  return r >= 1.0 ? 0.0 : held(note_off) * (1.0 - r);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x5851f42d4c957f2dULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

}  // namespace

double partial_phase(std::uint64_t seed, std::size_t instrument, std::size_t pitch, std::size_t k) {
  const std::uint64_t h = hash_combine({seed, instrument, pitch, k});
  return 2.0 * std::numbers::pi * (static_cast<double>(h >> 11) * 0x1.0p-53);
}

SynthParams synth_params(const SingConfig& config) {
  return {config.model.signal_length, config.model.sample_rate, config.model.n_velocities,
          config.data.pitch_offset,   config.data.note_off_fraction, config.data.seed};
}

dsp::Waveform synth_note(const NoteLabel& label, const InstrumentSpec& spec, const SynthParams& params) {
  require(params.length > 0 && params.sample_rate > 0, "synth_note needs a positive length and sample rate");
  require(spec.partials.size() == spec.amplitudes.size(), "instrument partials and amplitudes differ in length");
  const double gain = velocity_amplitude(label.velocity, params.n_velocities);
  const double f0 = midi_to_freq(params.pitch_offset + static_cast<int>(label.pitch));
  const double nyquist = params.sample_rate / 2.0;
  const double duration = static_cast<double>(params.length) / params.sample_rate;
  const double note_off = params.note_off_fraction * duration;

  std::vector<double> x(params.length, 0.0);
  double amplitude_bound = 0.0;
  for (std::size_t k = 0; k < spec.partials.size(); ++k) {
    const double f = f0 * spec.partials[k];
    if (f >= nyquist) continue;
    amplitude_bound += std::abs(spec.amplitudes[k]);
    const double phase = partial_phase(params.seed, label.instrument, label.pitch, k);
    const double w = 2.0 * std::numbers::pi * f / params.sample_rate;
    for (std::size_t n = 0; n < params.length; ++n) {
      x[n] += spec.amplitudes[k] * std::sin(w * static_cast<double>(n) + phase);
    }
  }
  double envelope_peak = 0.0;
  for (std::size_t n = 0; n < params.length; ++n) {
    const double e = envelope_at(spec.envelope, static_cast<double>(n) / params.sample_rate, note_off);
    x[n] *= e;
    envelope_peak = std::max(envelope_peak, e);
  }
  // Normalising by the phase-aligned peak rather than the realised one keeps
  // the gain independent of the drawn phases.
  const double peak = amplitude_bound * envelope_peak;
  if (peak > 0.0) {
    const double scale = gain * 0.95 / peak;
    for (double& v : x) v *= scale;
  }
  return dsp::Waveform(std::move(x), params.sample_rate);
}

std::vector<NoteLabel> all_labels(const ModelConfig& c) {
  std::vector<NoteLabel> out;
  for (std::size_t v = 0; v < c.n_velocities; ++v) {
    for (std::size_t i = 0; i < c.n_instruments; ++i) {
      for (std::size_t p = 0; p < c.n_pitches; ++p) out.push_back({v, i, p});
    }
  }
  return out;
}

std::vector<Example> generate_corpus(const SingConfig& config) {
  const SynthParams params = synth_params(config);
  std::vector<Example> out;
  for (const NoteLabel& label : all_labels(config.model)) {
    out.push_back({label, synth_note(label, instrument_spec(label.instrument), params)});
  }
  return out;
}

PitchSplit pitch_completion_split(std::size_t n_instruments, std::size_t n_pitches, double holdout_fraction,
                                  std::uint64_t seed) {
  require(n_pitches >= 2, "pitch completion split needs at least 2 pitches per instrument");
  require(n_instruments >= 1, "pitch completion split needs at least one instrument");
  require(holdout_fraction > 0.0 && holdout_fraction < 1.0, "holdout_fraction must be in (0, 1)");
  // The small offset keeps exact products such as 0.1 * 10 from rounding up.
  const std::size_t k = std::min<std::size_t>(
      n_pitches - 1, static_cast<std::size_t>(std::ceil(holdout_fraction * n_pitches - 1e-9)));

  auto draw = [&](std::size_t instrument, std::uint64_t attempt) {
    std::vector<std::size_t> pitches(n_pitches);
    for (std::size_t p = 0; p < n_pitches; ++p) pitches[p] = p;
    std::uint64_t state = hash_combine({seed, instrument, attempt});
    for (std::size_t i = n_pitches - 1; i > 0; --i) {
      state = splitmix64(state);
      std::swap(pitches[i], pitches[state % (i + 1)]);
    }
    pitches.resize(k);
    return pitches;
  };

  std::vector<std::vector<std::size_t>> held(n_instruments);
  std::vector<std::uint64_t> attempts(n_instruments, 0);
  for (std::size_t i = 0; i < n_instruments; ++i) held[i] = draw(i, 0);

  auto vanished = [&]() -> std::optional<std::size_t> {
    if (n_instruments < 2) return std::nullopt;
    std::vector<std::size_t> count(n_pitches, 0);
    for (const auto& h : held) {
      for (std::size_t p : h) ++count[p];
    }
    for (std::size_t p = 0; p < n_pitches; ++p) {
      if (count[p] == n_instruments) return p;
    }
    return std::nullopt;
  };
  // Redraw the highest-index instrument holding out a vanished pitch.
  for (std::size_t guard = 0; guard < 10000; ++guard) {
    const auto p = vanished();
    if (!p) break;
    const std::size_t i = n_instruments - 1 - (guard % n_instruments);
    held[i] = draw(i, ++attempts[i]);
  }
  if (vanished()) fail(ErrorKind::kInvalidState, "could not draw a split keeping every pitch in training");

  PitchSplit split;
  split.seed = seed;
  split.holdout_fraction = holdout_fraction;
  for (std::size_t i = 0; i < n_instruments; ++i) {
    for (std::size_t p : held[i]) split.test.insert({i, p});
  }
  return split;
}

SplitExamples apply_split(const std::vector<Example>& corpus, const PitchSplit& split) {
  SplitExamples out;
  for (const Example& e : corpus) (split.is_test(e.label) ? out.test : out.train).push_back(e);
  return out;
}

json split_to_json(const PitchSplit& split, std::size_t n_instruments, std::size_t n_pitches) {
  json test = json::array();
  json train = json::array();
  for (std::size_t i = 0; i < n_instruments; ++i) {
    for (std::size_t p = 0; p < n_pitches; ++p) {
      (split.test.count({i, p}) ? test : train).push_back({i, p});
    }
  }
  return json{{"seed", split.seed},
              {"holdout_fraction", split.holdout_fraction},
              {"n_instruments", n_instruments},
              {"n_pitches", n_pitches},
              {"test", test},
              {"train", train}};
}

PitchSplit split_from_json(const json& j) {
  try {
    PitchSplit s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.holdout_fraction = j.at("holdout_fraction").get<double>();
    for (const auto& pair : j.at("test")) s.test.insert({pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()});
    return s;
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("malformed split file: ") + e.what());
  }
}

void save_split(const PitchSplit& split, std::size_t n_instruments, std::size_t n_pitches,
                const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out << split_to_json(split, n_instruments, n_pitches).dump(2) << "\n";
  if (!out) fail(ErrorKind::kIo, "failed writing " + path.string());
}

PitchSplit load_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open split file " + path.string());
  try {
    return split_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kInvalidInput, "malformed split file " + path.string() + ": " + e.what());
  }
}

std::string note_id(const NoteLabel& label) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "inst%04zu_pitch%03zu_vel%zu", label.instrument, label.pitch, label.velocity);
  return buf;
}

void export_corpus(const std::vector<Example>& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  json manifest = json::object();
  for (const Example& e : corpus) {
    const std::string id = note_id(e.label);
    wav::write_wav(e.audio, dir / (id + ".wav"));
    manifest[id] = {{"instrument", e.label.instrument}, {"pitch", e.label.pitch}, {"velocity", e.label.velocity}};
  }
  std::ofstream out(dir / kManifestName);
  if (!out) fail(ErrorKind::kIo, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
  if (!out) fail(ErrorKind::kIo, "failed writing manifest in " + dir.string());
}

LoadedCorpus load_manifest_corpus(const std::filesystem::path& dir, const ModelConfig& config) {
  LoadedCorpus out;
  const auto manifest_path = dir / kManifestName;
  if (!std::filesystem::exists(manifest_path)) {
    if (!std::filesystem::is_directory(dir)) fail(ErrorKind::kIo, "corpus directory " + dir.string() + " not found");
    return out;
  }
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::kIo, "cannot open " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kInvalidInput, "malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!manifest.is_object()) fail(ErrorKind::kInvalidInput, "manifest must be a JSON object of note entries");

  std::map<NoteLabel, Example> by_label;
  std::map<NoteLabel, std::string> owner;
  for (auto it = manifest.begin(); it != manifest.end(); ++it) {
    const std::string& id = it.key();
    NoteLabel label;
    try {
      const json& entry = it.value();
      const auto index = [&](const char* key) {
        const auto v = entry.at(key).get<long long>();
        if (v < 0) throw std::out_of_range(std::string(key) + " is negative");
        return static_cast<std::size_t>(v);
      };
      label = {index("velocity"), index("instrument"), index("pitch")};
    } catch (const std::exception& e) {
      out.errors.push_back(id + ": malformed entry: " + e.what());
      continue;
    }
    try {
      model::validate_label(label, config);
    } catch (const Error& e) {
      out.errors.push_back(id + ": " + e.what());
      continue;
    }
    if (owner.count(label)) {
      out.errors.push_back(id + ": duplicate recording for " + model::to_string(label) + " (already given by " +
                           owner[label] + ")");
      continue;
    }
    try {
      dsp::Waveform audio = wav::read_wav(dir / (id + ".wav"));
      if (audio.sample_rate() != config.sample_rate) {
        out.errors.push_back(id + ": sample rate " + std::to_string(audio.sample_rate()) + " Hz, expected " +
                             std::to_string(config.sample_rate));
        continue;
      }
      if (audio.size() != config.signal_length) {
        out.errors.push_back(id + ": " + std::to_string(audio.size()) + " samples, expected " +
                             std::to_string(config.signal_length));
        continue;
      }
      owner[label] = id;
      by_label.emplace(label, Example{label, std::move(audio)});
    } catch (const Error& e) {
      out.errors.push_back(id + ": " + e.what());
    }
  }
  for (auto& [label, example] : by_label) out.examples.push_back(std::move(example));
  return out;
}

}  // namespace sing::data
