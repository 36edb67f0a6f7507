#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "sing/config.hpp"

namespace sing::testing {

// Every layer type at a size that trains in milliseconds: 4 x 4 x 2 notes of
// 256 samples.
inline SingConfig tiny_sing_config() {
  SingConfig c = SingConfig::preset_named("toy");
  auto& m = c.model;
  m.signal_length = 256;
  m.kernel = 32;
  m.stride = 8;
  m.seq_len = 33;
  m.channels = 6;
  m.seq_dim = 3;
  m.lstm_hidden = 5;
  m.embed = {2, 2, 2, 2};
  m.n_pitches = 4;
  m.loss_frame = 64;
  m.loss_hop = 16;
  c.train.batch_size = 4;
  c.train.epochs_autoencoder = 3;
  c.train.epochs_lstm = 3;
  c.train.epochs_finetune = 2;
  c.train.tbptt_len = 8;
  c.train.learning_rate = 1e-3;
  return c;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sing_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> read_bytes(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace sing::testing
