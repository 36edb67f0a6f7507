#include "sing/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "sing/checkpoint.hpp"
#include "sing/config.hpp"
#include "sing/dataset.hpp"
#include "sing/error.hpp"
#include "sing/training.hpp"
#include "sing/wav.hpp"

namespace sing::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct ConfigSource {
  std::string path;
  std::string preset;
};

std::optional<SingConfig> explicit_config(const ConfigSource& src) {
  if (!src.path.empty() && !src.preset.empty()) {
    fail(ErrorKind::kInvalidArgument, "--config and --preset are mutually exclusive");
  }
  if (!src.path.empty()) return load_config(src.path);
  if (!src.preset.empty()) return SingConfig::preset_named(src.preset);
  return std::nullopt;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::kIo, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorKind::kIo, "write failed for " + path.string());
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// dataset gen

struct DatasetArgs {
  ConfigSource config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

void cmd_dataset_gen(const DatasetArgs& a, std::ostream& out) {
  SingConfig config = explicit_config(a.config).value_or(SingConfig::preset_named("toy"));
  if (a.seed) config.data.seed = *a.seed;
  config.validate();
  make_dirs(a.out_dir);
  const auto corpus = data::generate_corpus(config);
  data::export_corpus(corpus, a.out_dir);
  const auto& m = config.model;
  const auto split = data::pitch_completion_split(m.n_instruments, m.n_pitches, config.data.holdout_fraction,
                                                  config.data.seed);
  data::save_split(split, m.n_instruments, m.n_pitches, fs::path(a.out_dir) / data::kSplitName);
  save_config(config, fs::path(a.out_dir) / "config.json");
  out << "wrote " << corpus.size() << " notes, " << split.test.size() << " held-out (instrument, pitch) pairs to "
      << a.out_dir << "\n";
}

// ---------------------------------------------------------------------------
// corpus + split resolution shared by train and eval

struct Corpus {
  std::vector<data::Example> examples;
  data::PitchSplit split;
};

data::PitchSplit read_split(const fs::path& path, const ModelConfig& m) {
  if (!fs::exists(path)) fail(ErrorKind::kInvalidInput, "split file " + path.string() + " not found");
  std::ifstream f(path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    fail(ErrorKind::kInvalidInput, "split file " + path.string() + " is not valid JSON: " + e.what());
  }
  const auto ni = j.value("n_instruments", std::size_t{0});
  const auto np = j.value("n_pitches", std::size_t{0});
  if (ni != m.n_instruments || np != m.n_pitches) {
    fail(ErrorKind::kInvalidInput, "split file " + path.string() + " covers " + std::to_string(ni) +
                                       " instruments x " + std::to_string(np) + " pitches but the model has " +
                                       std::to_string(m.n_instruments) + " x " + std::to_string(m.n_pitches));
  }
  return data::split_from_json(j);
}

Corpus load_corpus(const fs::path& dir, const std::string& split_file, const SingConfig& config) {
  if (!fs::is_directory(dir)) fail(ErrorKind::kInvalidInput, "corpus directory " + dir.string() + " not found");
  auto loaded = data::load_manifest_corpus(dir, config.model);
  if (!loaded.errors.empty()) {
    fail(ErrorKind::kInvalidInput, std::to_string(loaded.errors.size()) + " corpus item(s) rejected, first: " +
                                       loaded.errors.front());
  }
  if (loaded.examples.empty()) fail(ErrorKind::kInvalidInput, "corpus " + dir.string() + " is empty");
  Corpus c;
  c.examples = std::move(loaded.examples);
  c.split = read_split(split_file.empty() ? dir / data::kSplitName : fs::path(split_file), config.model);
  return c;
}

Corpus synthetic_corpus(const SingConfig& config) {
  const auto& m = config.model;
  return Corpus{data::generate_corpus(config),
                data::pitch_completion_split(m.n_instruments, m.n_pitches, config.data.holdout_fraction,
                                             config.data.seed)};
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ConfigSource config;
  std::string stage = "all";
  std::string run_dir;
  std::string corpus;
};

void cmd_train(const TrainArgs& a, std::ostream& out) {
  fs::path run_dir = a.run_dir;
  if (run_dir.empty()) {
    const char* env = std::getenv(kRunDirEnv);
    if (!env || !*env) {
      fail(ErrorKind::kInvalidArgument, std::string("no run directory: pass --run-dir or set ") + kRunDirEnv);
    }
    run_dir = env;
  }
  std::vector<train::Stage> stages;
  if (a.stage == "all") {
    stages.assign(std::begin(train::kStages), std::end(train::kStages));
  } else {
    stages.push_back(train::stage_from_string(a.stage));
  }

  // Precedence: explicit flag, the run's own echoed config, the corpus'
  // config, then the toy preset.
  std::optional<SingConfig> config = explicit_config(a.config);
  const fs::path echoed = run_dir / "config.json";
  if (!config && fs::exists(echoed)) config = load_config(echoed);
  if (!config && !a.corpus.empty() && fs::exists(fs::path(a.corpus) / "config.json")) {
    config = load_config(fs::path(a.corpus) / "config.json");
  }
  if (!config) config = SingConfig::preset_named("toy");
  config->validate();

  const Corpus corpus = a.corpus.empty() ? synthetic_corpus(*config) : load_corpus(a.corpus, "", *config);
  auto split = data::apply_split(corpus.examples, corpus.split);
  if (split.train.empty()) fail(ErrorKind::kInvalidInput, "training split is empty");

  if (fs::exists(echoed) && to_json(load_config(echoed)) != to_json(*config)) {
    fail(ErrorKind::kInvalidState, "run directory " + run_dir.string() +
                                       " was started with a different config; use a fresh run directory");
  }
  make_dirs(run_dir);
  save_config(*config, echoed);

  train::RunHooks hooks;
  hooks.on_epoch = [&](const train::EpochRecord& r) {
    out << train::to_string(r.stage) << " epoch " << r.epoch << "/" << train::stage_epochs(config->train, r.stage)
        << " loss " << std::setprecision(6) << r.loss << " (" << std::setprecision(3) << r.wall_time << " s)\n"
        << std::flush;
  };
  for (train::Stage stage : stages) {
    const auto outcome = train::run_stage(*config, split.train, stage, run_dir, hooks);
    if (outcome.already_complete) {
      out << train::to_string(stage) << " already complete in " << run_dir.string() << "\n";
    }
  }
  out << "checkpoints in " << run_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string checkpoint;
  std::size_t velocity = 0;
  std::size_t instrument = 0;
  std::size_t pitch = 0;
  std::string out_path;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto c = ckpt::load(a.checkpoint);
  const model::NoteLabel label{a.velocity, a.instrument, a.pitch};
  model::validate_label(label, c.config.model);
  train::Model model(c.config.model, false);
  train::restore_model(c, model);
  grad::NoGradGuard guard;
  const auto wave = model::to_waveform(model.synthesize(label).value(), c.config.model.sample_rate);
  wav::write_wav(wave, a.out_path);
  out << "wrote " << wave.size() << " samples for " << model::to_string(label) << " to " << a.out_path << "\n";
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::vector<std::string> checkpoints;
  std::string corpus;
  std::string split;
  std::string out_path;
  bool mirror_table = false;
  bool reference = false;
};

struct Row {
  std::string name;
  std::string checkpoint;
  bool waveform_na = false;
  train::Metrics train;
  train::Metrics test;
};

std::string variant_suffix(const SingConfig& config) {
  return std::string(config.model.time_embedding ? "" : " no time embedding") + " (" +
         to_string(config.train.loss) + ")";
}

json metrics_json(const train::Metrics& m, bool waveform_na) {
  return json{{"spectral_loss", m.spectral_loss},
              {"waveform_mse", waveform_na ? json(nullptr) : json(m.waveform_mse)},
              {"itakura_saito", m.itakura_saito},
              {"count", m.count}};
}

std::string cell(double v, bool na = false) {
  if (na) return "N/A";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void print_table(const std::vector<Row>& rows, std::ostream& out) {
  std::size_t width = 5;
  for (const auto& r : rows) width = std::max(width, r.name.size());
  const auto pad = [&](const std::string& s, std::size_t w) { return s + std::string(w > s.size() ? w - s.size() : 0, ' '); };
  out << pad("Model", width) << "  " << pad("Spectral train", 15) << pad("Spectral test", 15)
      << pad("Wav MSE train", 15) << pad("Wav MSE test", 15) << pad("IS train", 15) << "IS test\n";
  for (const auto& r : rows) {
    out << pad(r.name, width) << "  " << pad(cell(r.train.spectral_loss), 15) << pad(cell(r.test.spectral_loss), 15)
        << pad(cell(r.train.waveform_mse, r.waveform_na), 15) << pad(cell(r.test.waveform_mse, r.waveform_na), 15)
        << pad(cell(r.train.itakura_saito), 15) << cell(r.test.itakura_saito) << "\n";
  }
}

void cmd_eval(const EvalArgs& a, std::ostream& out) {
  std::vector<Row> rows;
  std::optional<Corpus> reference_corpus;
  losses::SpectralParams reference_params;
  for (const auto& path : a.checkpoints) {
    const auto c = ckpt::load(path);
    const Corpus corpus = load_corpus(a.corpus, a.split, c.config);
    const auto split = data::apply_split(corpus.examples, corpus.split);
    if (split.test.empty()) fail(ErrorKind::kInvalidInput, "no corpus notes fall in the held-out pairs of the split");
    if (!reference_corpus) {
      reference_corpus = corpus;
      reference_params = c.config.model.spectral();
    }

    const std::string stage = c.state.value("stage", train::to_string(train::Stage::kFinetune));
    const bool autoencoder = stage == train::to_string(train::Stage::kAutoencoder);
    train::Model model(c.config.model, autoencoder);
    train::restore_model(c, model);
    const bool na = a.mirror_table && c.config.train.loss == LossKind::kSpectral;
    if (autoencoder) {
      rows.push_back(Row{"Autoencoder" + variant_suffix(c.config), path, na,
                         train::evaluate_autoencoder(model, split.train), train::evaluate_autoencoder(model, split.test)});
    } else {
      const std::string name = stage == train::to_string(train::Stage::kLstm) ? "SING before fine-tuning" : "SING";
      rows.push_back(Row{name + variant_suffix(c.config), path, na, train::evaluate_sing(model, split.train),
                         train::evaluate_sing(model, split.test)});
    }
  }
  if (a.reference) {
    if (!reference_corpus) fail(ErrorKind::kInvalidArgument, "--reference needs at least one checkpoint");
    const auto split = data::apply_split(reference_corpus->examples, reference_corpus->split);
    const auto identity = [](const data::Example& e) { return e.audio; };
    rows.insert(rows.begin(), Row{"Ground truth", "", false, train::evaluate(split.train, identity, reference_params),
                                  train::evaluate(split.test, identity, reference_params)});
  }

  print_table(rows, out);
  if (!a.out_path.empty()) {
    json records = json::array();
    for (const auto& r : rows) {
      records.push_back(json{{"model", r.name},
                             {"checkpoint", r.checkpoint},
                             {"train", metrics_json(r.train, r.waveform_na)},
                             {"test", metrics_json(r.test, r.waveform_na)}});
    }
    write_text(a.out_path, json{{"rows", records}}.dump(2) + "\n");
  }
}

// ---------------------------------------------------------------------------
// spectrogram

struct SpectrogramArgs {
  std::string in_path;
  std::string out_path;
  losses::SpectralParams params;
};

void cmd_spectrogram(const SpectrogramArgs& a, std::ostream& out) {
  const auto wave = wav::read_wav(a.in_path);
  const auto window = dsp::hann_window(a.params.frame_size);
  const auto s = dsp::log_power(dsp::stft(wave, a.params.frame_size, a.params.hop, window), a.params.epsilon);
  std::ostringstream text;
  write_spectrogram_csv(s, a.params, text);
  write_text(a.out_path, text.str());
  out << "wrote " << s.frames() << " x " << s.bins() << " log-power spectrogram to " << a.out_path << "\n";
}

// ---------------------------------------------------------------------------
// params

void cmd_params(const ConfigSource& src, std::ostream& out) {
  const SingConfig config = explicit_config(src).value_or(SingConfig::preset_named("toy"));
  config.validate();
  const auto counts = model::analytic_parameter_count(config.model);
  for (const auto& [group, n] : counts.groups) out << group << " " << n << "\n";
  out << "total " << counts.total << "\n"
      << "deployed " << counts.deployed << " (" << std::fixed << std::setprecision(1)
      << static_cast<double>(counts.deployed_bytes()) / 1e6 << " MB as float32)\n";
}

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("--config", src.path, "JSON config file (keys override the named preset)");
  cmd->add_option("--preset", src.preset, "Built-in preset: toy or paper");
}

}  // namespace

void write_spectrogram_csv(const dsp::LogPowerSpectrogram& s, const losses::SpectralParams& params,
                           std::ostream& out) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", params.epsilon);
  out << "# frame_size=" << params.frame_size << ",hop=" << params.hop << ",epsilon=" << buf << "\n";
  for (std::size_t f = 0; f < s.frames(); ++f) {
    const auto row = s.data.row(f);
    for (std::size_t b = 0; b < row.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[b]);
      if (b) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("SING: frame-level neural synthesizer for musical notes", "sing");
  app.require_subcommand(1);

  auto* dataset = app.add_subcommand("dataset", "Synthetic corpus tools");
  dataset->require_subcommand(1);
  DatasetArgs ds;
  auto* gen = dataset->add_subcommand("gen", "Write the synthetic corpus, manifest and pitch-completion split");
  add_config_options(gen, ds.config);
  gen->add_option("--out", ds.out_dir, "Output directory")->required();
  gen->add_option("--seed", ds.seed, "Corpus and split seed (overrides data.seed)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Run or resume training stages");
  add_config_options(train_cmd, tr.config);
  train_cmd->add_option("--stage", tr.stage, "autoencoder, lstm, finetune or all")
      ->check(CLI::IsMember({"autoencoder", "lstm", "finetune", "all"}));
  train_cmd->add_option("--run-dir", tr.run_dir, std::string("Run directory (default $") + kRunDirEnv + ")");
  train_cmd->add_option("--corpus", tr.corpus, "Corpus directory from `dataset gen` (default: synthesize in memory)");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Render one note from a checkpoint");
  synth->add_option("--checkpoint", sy.checkpoint, "Checkpoint file")->required();
  synth->add_option("--velocity", sy.velocity, "Velocity index")->required();
  synth->add_option("--instrument", sy.instrument, "Instrument index")->required();
  synth->add_option("--pitch", sy.pitch, "Pitch index")->required();
  synth->add_option("--out", sy.out_path, "Output WAV")->required();

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Train/test metric table for one or more checkpoints");
  eval->add_option("--checkpoint", ev.checkpoints, "Checkpoint file (repeatable)")->required();
  eval->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  eval->add_option("--split", ev.split, "Split file (default <corpus>/split.json)");
  eval->add_option("--out", ev.out_path, "Write JSON records here");
  eval->add_flag("--mirror-table", ev.mirror_table, "Show waveform MSE as N/A for spectral-trained models");
  eval->add_flag("--reference", ev.reference, "Add a ground-truth row (corpus against itself)");

  SpectrogramArgs sp;
  auto* spec = app.add_subcommand("spectrogram", "Dump the log-power spectrogram of a WAV as CSV");
  spec->add_option("--in", sp.in_path, "Input WAV")->required();
  spec->add_option("--out", sp.out_path, "Output CSV")->required();
  spec->add_option("--frame-size", sp.params.frame_size, "STFT frame size")->capture_default_str();
  spec->add_option("--hop", sp.params.hop, "STFT hop")->capture_default_str();
  spec->add_option("--epsilon", sp.params.epsilon, "Log offset")->capture_default_str();

  ConfigSource pc;
  auto* params = app.add_subcommand("params", "Parameter counts for a config");
  add_config_options(params, pc);

  ConfigSource cc;
  auto* show = app.add_subcommand("config", "Print the effective config as JSON");
  add_config_options(show, cc);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& ch : msg) if (ch == '\n') ch = ' ';
    err << "error[" << to_string(ErrorKind::kInvalidArgument) << "]: " << msg << "\n";
    return exit_code(ErrorKind::kInvalidArgument);
  }

  try {
    if (gen->parsed()) cmd_dataset_gen(ds, out);
    else if (train_cmd->parsed()) cmd_train(tr, out);
    else if (synth->parsed()) cmd_synth(sy, out);
    else if (eval->parsed()) cmd_eval(ev, out);
    else if (spec->parsed()) cmd_spectrogram(sp, out);
    else if (params->parsed()) cmd_params(pc, out);
    else if (show->parsed()) {
      const SingConfig config = explicit_config(cc).value_or(SingConfig::preset_named("toy"));
      config.validate();
      out << to_json(config).dump(2) << "\n";
    }
  } catch (const Error& e) {
    std::string msg = e.what();
    for (char& ch : msg) if (ch == '\n') ch = ' ';
    err << "error[" << to_string(e.kind()) << "]: " << msg << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sing::cli
