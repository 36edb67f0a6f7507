#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "sing/cli.hpp"
#include "sing/dataset.hpp"
#include "sing/training.hpp"
#include "sing/wav.hpp"

using namespace sing;
using sing::testing::TempDir;
using sing::testing::read_bytes;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// Diagnostics are a single "error[kind]: ..." line.
void check_diagnostic(const Result& r, int code, const std::string& kind) {
  CHECK(r.code == code);
  CHECK(r.err.starts_with("error[" + kind + "]: "));
  CHECK(r.err.find('\n') == r.err.size() - 1);
}

struct TinyRun {
  TempDir dir{"cli"};
  fs::path config = dir / "tiny.json";
  fs::path corpus = dir / "corpus";
  fs::path run_dir = dir / "run";

  TinyRun() {
    save_config(testing::tiny_sing_config(), config);
    REQUIRE(run({"dataset", "gen", "--config", config.string(), "--out", corpus.string()}).code == 0);
  }
  void train_all() {
    const auto r = run({"train", "--config", config.string(), "--corpus", corpus.string(), "--run-dir",
                        run_dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
  }
};

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream f(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("dataset gen writes a deterministic corpus, manifest and split") {
  TinyRun t;
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(t.corpus)) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 4 * 4 * 2);
  CHECK(fs::exists(t.corpus / data::kManifestName));
  const auto split = nlohmann::json::parse(std::ifstream(t.corpus / data::kSplitName));
  CHECK(split.at("test").size() == 4);  // ceil(0.1 * 4) = 1 pitch per instrument

  TempDir again("cli_again");
  REQUIRE(run({"dataset", "gen", "--config", t.config.string(), "--out", again.path().string()}).code == 0);
  for (const auto& e : fs::directory_iterator(t.corpus)) {
    CHECK(read_bytes(e.path()) == read_bytes(again.path() / e.path().filename()));
  }
  TempDir reseeded("cli_seed");
  REQUIRE(run({"dataset", "gen", "--config", t.config.string(), "--out", reseeded.path().string(), "--seed", "5"})
              .code == 0);
  CHECK(read_bytes(t.corpus / "inst0001_pitch002_vel0.wav") !=
        read_bytes(reseeded.path() / "inst0001_pitch002_vel0.wav"));
}

TEST_CASE("the toy preset corpus has 128 notes and 8 held-out pairs") {
  TempDir dir("cli_toy");
  const auto r = run({"dataset", "gen", "--preset", "toy", "--out", dir.path().string()});
  REQUIRE(r.code == 0);
  std::size_t wavs = 0;
  for (const auto& e : fs::directory_iterator(dir.path())) wavs += e.path().extension() == ".wav";
  CHECK(wavs == 128);
  const auto split = nlohmann::json::parse(std::ifstream(dir / data::kSplitName));
  CHECK(split.at("test").size() == 8);
}

TEST_CASE("train runs stages in order, echoes its config and resumes") {
  TinyRun t;
  const auto early = run({"train", "--config", t.config.string(), "--corpus", t.corpus.string(), "--run-dir",
                          t.run_dir.string(), "--stage", "finetune"});
  check_diagnostic(early, 3, "invalid-state");
  CHECK(early.err.find("lstm") != std::string::npos);

  t.train_all();
  for (train::Stage s : train::kStages) CHECK(fs::exists(train::checkpoint_path(t.run_dir, s)));
  CHECK(to_json(load_config(t.run_dir / "config.json")) == to_json(testing::tiny_sing_config()));
  const auto cfg = testing::tiny_sing_config().train;
  CHECK(lines(train::log_path(t.run_dir)).size() ==
        cfg.epochs_autoencoder + cfg.epochs_lstm + cfg.epochs_finetune);

  // Rerunning picks the echoed config and finds everything done.
  const auto again = run({"train", "--corpus", t.corpus.string(), "--run-dir", t.run_dir.string()});
  CHECK(again.code == 0);
  CHECK(again.out.find("finetune already complete") != std::string::npos);

  SingConfig other = testing::tiny_sing_config();
  other.train.seed = 99;
  save_config(other, t.dir / "other.json");
  check_diagnostic(run({"train", "--config", (t.dir / "other.json").string(), "--corpus", t.corpus.string(),
                        "--run-dir", t.run_dir.string()}),
                   3, "invalid-state");
}

TEST_CASE("train reads its default run directory from the environment") {
  TinyRun t;
  ::unsetenv(cli::kRunDirEnv);
  check_diagnostic(run({"train", "--config", t.config.string(), "--stage", "autoencoder"}), 2, "invalid-argument");
  const fs::path env_dir = t.dir / "from_env";
  ::setenv(cli::kRunDirEnv, env_dir.c_str(), 1);
  const auto r = run({"train", "--config", t.config.string(), "--corpus", t.corpus.string(), "--stage",
                      "autoencoder"});
  ::unsetenv(cli::kRunDirEnv);
  CHECK(r.code == 0);
  CHECK(fs::exists(train::checkpoint_path(env_dir, train::Stage::kAutoencoder)));
}

TEST_CASE("synth and eval on a trained run") {
  TinyRun t;
  t.train_all();
  const auto ckpt = train::checkpoint_path(t.run_dir, train::Stage::kFinetune).string();

  SUBCASE("synth writes signal_length samples, deterministically, including held-out pairs") {
    const auto split = data::load_split(t.corpus / data::kSplitName);
    const auto [inst, pitch] = *split.test.begin();
    const auto a = t.dir / "a.wav";
    const auto b = t.dir / "b.wav";
    for (const auto& path : {a, b}) {
      const auto r = run({"synth", "--checkpoint", ckpt, "--velocity", "1", "--instrument", std::to_string(inst),
                          "--pitch", std::to_string(pitch), "--out", path.string()});
      REQUIRE(r.code == 0);
    }
    CHECK(wav::read_wav(a).size() == 256);
    CHECK(read_bytes(a) == read_bytes(b));

    const auto bad = run({"synth", "--checkpoint", ckpt, "--velocity", "0", "--instrument", "0", "--pitch", "4",
                          "--out", (t.dir / "c.wav").string()});
    check_diagnostic(bad, 2, "invalid-argument");
    CHECK(bad.err.find("[0, 4)") != std::string::npos);
  }

  SUBCASE("eval emits table rows and JSON records, deterministically") {
    const auto json_a = t.dir / "a.json";
    const auto json_b = t.dir / "b.json";
    const auto ae = train::checkpoint_path(t.run_dir, train::Stage::kAutoencoder).string();
    const auto lstm = train::checkpoint_path(t.run_dir, train::Stage::kLstm).string();
    const auto eval_to = [&](const fs::path& out) {
      return run({"eval", "--checkpoint", ae, "--checkpoint", lstm, "--checkpoint", ckpt, "--corpus",
                  t.corpus.string(), "--reference", "--out", out.string()});
    };
    const auto r1 = eval_to(json_a);
    const auto r2 = eval_to(json_b);
    REQUIRE(r1.code == 0);
    CHECK(r1.out == r2.out);
    CHECK(read_bytes(json_a) == read_bytes(json_b));
    CHECK(r1.out.find("Spectral train") != std::string::npos);
    CHECK(r1.out.find("Wav MSE test") != std::string::npos);

    const auto rows = nlohmann::json::parse(std::ifstream(json_a)).at("rows");
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].at("model") == "Ground truth");
    for (const char* split : {"train", "test"}) {
      for (const char* key : {"spectral_loss", "waveform_mse", "itakura_saito"}) {
        CHECK(std::abs(rows[0].at(split).at(key).get<double>()) < 1e-12);
      }
    }
    CHECK(rows[1].at("model") == "Autoencoder (spectral)");
    CHECK(rows[2].at("model") == "SING before fine-tuning (spectral)");
    CHECK(rows[3].at("model") == "SING (spectral)");
    CHECK(rows[3].at("test").at("count") == 8);  // 4 held-out pairs x 2 velocities
    CHECK(rows[3].at("train").at("count") == 24);
    CHECK(rows[3].at("train").at("spectral_loss").get<double>() > 0.0);

    const auto mirrored = run({"eval", "--checkpoint", ckpt, "--corpus", t.corpus.string(), "--mirror-table",
                               "--out", json_a.string()});
    CHECK(mirrored.code == 0);
    CHECK(mirrored.out.find("N/A") != std::string::npos);
    CHECK(nlohmann::json::parse(std::ifstream(json_a)).at("rows")[0].at("test").at("waveform_mse").is_null());
  }

  SUBCASE("split or corpus mismatches are invalid input") {
    auto split = nlohmann::json::parse(std::ifstream(t.corpus / data::kSplitName));
    split["n_pitches"] = 16;
    std::ofstream(t.dir / "bad_split.json") << split.dump();
    check_diagnostic(run({"eval", "--checkpoint", ckpt, "--corpus", t.corpus.string(), "--split",
                          (t.dir / "bad_split.json").string()}),
                     2, "invalid-input");
    check_diagnostic(run({"eval", "--checkpoint", ckpt, "--corpus", (t.dir / "nowhere").string()}), 2,
                     "invalid-input");
    fs::remove(t.corpus / "inst0000_pitch000_vel0.wav");
    check_diagnostic(run({"eval", "--checkpoint", ckpt, "--corpus", t.corpus.string()}), 2, "invalid-input");
  }

  SUBCASE("a corrupt checkpoint is a parse error") {
    std::ofstream(t.dir / "junk.ckpt") << "SINGCKPT";
    check_diagnostic(run({"synth", "--checkpoint", (t.dir / "junk.ckpt").string(), "--velocity", "0",
                          "--instrument", "0", "--pitch", "0", "--out", (t.dir / "x.wav").string()}),
                     2, "parse-error");
  }
}

TEST_CASE("spectrogram dump") {
  TempDir dir("cli_spec");
  std::vector<double> tone(64000);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = 0.5 * std::sin(0.07 * static_cast<double>(i));
  const dsp::Waveform w(tone, 16000);
  wav::write_wav(w, dir / "tone.wav");
  REQUIRE(run({"spectrogram", "--in", (dir / "tone.wav").string(), "--out", (dir / "tone.csv").string()}).code == 0);
  const auto rows = lines(dir / "tone.csv");
  REQUIRE(rows.size() == 1 + 247);
  CHECK(rows[0] == "# frame_size=1024,hop=256,epsilon=1");

  // Values are written with round-trip precision.
  const auto read_back = wav::read_wav(dir / "tone.wav");
  const auto expected = dsp::log_power(dsp::stft(read_back, 1024, 256, dsp::hann_window(1024)), 1.0);
  for (std::size_t f : {std::size_t{0}, std::size_t{100}, std::size_t{246}}) {
    std::stringstream row(rows[1 + f]);
    std::string cell;
    std::size_t b = 0;
    while (std::getline(row, cell, ',')) {
      CHECK(std::strtod(cell.c_str(), nullptr) == expected.data(f, b));
      ++b;
    }
    CHECK(b == 513);
  }

  wav::write_wav(dsp::Waveform(std::vector<double>(4096, 0.0), 4000), dir / "silence.wav");
  REQUIRE(run({"spectrogram", "--in", (dir / "silence.wav").string(), "--out", (dir / "silence.csv").string(),
               "--frame-size", "256", "--hop", "64"})
              .code == 0);
  const auto silent = lines(dir / "silence.csv");
  CHECK(silent[0] == "# frame_size=256,hop=64,epsilon=1");
  CHECK(silent.size() == 1 + 61);
  for (std::size_t i = 1; i < silent.size(); ++i) CHECK(silent[i].find_first_not_of("0,") == std::string::npos);

  check_diagnostic(run({"spectrogram", "--in", (dir / "missing.wav").string(), "--out", (dir / "x.csv").string()}),
                   5, "io-error");
}

TEST_CASE("argument errors are single-line invalid-argument diagnostics") {
  check_diagnostic(run({}), 2, "invalid-argument");
  check_diagnostic(run({"bogus"}), 2, "invalid-argument");
  check_diagnostic(run({"train", "--stage", "sideways"}), 2, "invalid-argument");
  check_diagnostic(run({"synth", "--checkpoint", "x"}), 2, "invalid-argument");
  check_diagnostic(run({"params", "--preset", "huge"}), 2, "invalid-input");
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("params reports the deployed size") {
  const auto r = run({"params", "--preset", "paper"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("deployed") != std::string::npos);
  CHECK(run({"config", "--preset", "paper"}).out.find("\"signal_length\": 64000") != std::string::npos);
}
