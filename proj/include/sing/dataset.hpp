#pragma once

// Synthetic note corpus, the pitch-completion split and manifest-based
// corpus import/export.

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sing/config.hpp"
#include "sing/dsp.hpp"
#include "sing/model.hpp"

namespace sing::data {

using model::NoteLabel;

/// 440 * 2^((pitch - 69) / 12) for MIDI pitch in [0, 120].
double midi_to_freq(int pitch);

struct Envelope {
  double attack = 0.0;   // seconds, linear rise to 1
  double decay = 0.0;    // seconds, linear fall to sustain
  double sustain = 1.0;  // level
  double release = 0.0;  // seconds after note-off, linear fall to 0
};

struct InstrumentSpec {
  std::string name;
  std::vector<double> partials;    // frequency multiples of the fundamental
  std::vector<double> amplitudes;  // one per partial
  Envelope envelope;
};

/// Sine, sawtooth-like, odd-harmonic and inharmonic bell.
const std::vector<InstrumentSpec>& toy_instrument_bank();
/// Instrument index -> spec, cycling through the toy bank.
const InstrumentSpec& instrument_spec(std::size_t instrument);

/// Amplitude for velocity index v: (v + 1) / n_velocities.
double velocity_amplitude(std::size_t velocity, std::size_t n_velocities);

/// Envelope value at time t (seconds) for a note released at `note_off`.
double envelope_at(const Envelope& env, double t, double note_off);

/// Phase of partial k for (instrument, pitch); independent of velocity.
double partial_phase(std::uint64_t seed, std::size_t instrument, std::size_t pitch, std::size_t k);

struct SynthParams {
  std::size_t length = 0;
  int sample_rate = 0;
  std::size_t n_velocities = 1;
  int pitch_offset = 0;  // MIDI note of pitch index 0
  double note_off_fraction = 0.75;
  std::uint64_t seed = 0;
};

SynthParams synth_params(const SingConfig& config);

/// A(V) * env(t) * sum_k a_k sin(2 pi f_k t + phi_k), partials at or above
/// Nyquist dropped. Scaled so that 0.95 * A(V) bounds |x|, the bound being
/// sum_k |a_k| * max env (the peak if all phases lined up). A single
/// partial at full velocity therefore peaks at 0.95.
dsp::Waveform synth_note(const NoteLabel& label, const InstrumentSpec& spec, const SynthParams& params);

struct Example {
  NoteLabel label;
  dsp::Waveform audio;
};

/// Every (velocity, instrument, pitch) of the config, ordered by label.
std::vector<NoteLabel> all_labels(const ModelConfig& config);
std::vector<Example> generate_corpus(const SingConfig& config);

using PitchPair = std::pair<std::size_t, std::size_t>;  // (instrument, pitch)

struct PitchSplit {
  std::uint64_t seed = 0;
  double holdout_fraction = 0.1;
  std::set<PitchPair> test;  // held-out (instrument, pitch) pairs

  bool is_test(const NoteLabel& label) const { return test.count({label.instrument, label.pitch}) > 0; }
};

/// Holds out ceil(fraction * n_pitches) pitches per instrument with all
/// their velocities. Choices are redrawn until every pitch stays in the
/// train set of at least one instrument (when there are several).
PitchSplit pitch_completion_split(std::size_t n_instruments, std::size_t n_pitches, double holdout_fraction,
                                  std::uint64_t seed);

struct SplitExamples {
  std::vector<Example> train;
  std::vector<Example> test;
};
SplitExamples apply_split(const std::vector<Example>& corpus, const PitchSplit& split);

nlohmann::json split_to_json(const PitchSplit& split, std::size_t n_instruments, std::size_t n_pitches);
PitchSplit split_from_json(const nlohmann::json& j);
void save_split(const PitchSplit& split, std::size_t n_instruments, std::size_t n_pitches,
                const std::filesystem::path& path);
PitchSplit load_split(const std::filesystem::path& path);

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kSplitName = "split.json";

std::string note_id(const NoteLabel& label);

/// Writes <note_id>.wav per example plus manifest.json.
void export_corpus(const std::vector<Example>& corpus, const std::filesystem::path& dir);

struct LoadedCorpus {
  std::vector<Example> examples;    // ordered by label
  std::vector<std::string> errors;  // one line per rejected item
};

/// Reads manifest.json and the WAVs it names, checking labels against the
/// config vocabulary and audio against its sample rate and length. A
/// directory without a manifest is an empty corpus. Malformed manifests
/// throw invalid-input; bad items are reported in `errors`.
LoadedCorpus load_manifest_corpus(const std::filesystem::path& dir, const ModelConfig& config);

}  // namespace sing::data
