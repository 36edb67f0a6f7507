#pragma once

// Three-stage training: autoencoder, LSTM against frozen encoder targets with
// truncated backpropagation through time, then end-to-end fine-tuning.
// Also holds Adam, gradient clipping, run-directory orchestration and the
// train/test metric table.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sing/checkpoint.hpp"
#include "sing/dataset.hpp"
#include "sing/model.hpp"

namespace sing::train {

using grad::ParameterList;
using Model = model::SingModel<float>;

enum class Stage { kAutoencoder, kLstm, kFinetune };

std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);
inline constexpr Stage kStages[] = {Stage::kAutoencoder, Stage::kLstm, Stage::kFinetune};

struct AdamParams {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamParams adam_params(const TrainConfig& config);

class Adam {
 public:
  Adam(ParameterList<float> params, AdamParams hp);

  /// Bias-corrected update of every parameter from its gradient. Throws
  /// invalid-state naming the first parameter without a gradient.
  void step();
  std::uint64_t steps() const { return steps_; }
  const AdamParams& params() const { return hp_; }

  void save(ckpt::Checkpoint& c) const;
  void load(const ckpt::Checkpoint& c);

 private:
  ParameterList<float> params_;
  AdamParams hp_;
  std::vector<Tensor<float>> m_;
  std::vector<Tensor<float>> v_;
  std::uint64_t steps_ = 0;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_grad_norm(std::span<grad::Parameter<float>* const> params, double max_norm);

/// Parameters optimised by each stage.
ParameterList<float> stage_parameters(Model& model, Stage stage);

/// Deterministic permutation of [0, n) for (seed, stage, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, Stage stage, std::size_t epoch);

/// Stage-1/3 objective between a target and a generated waveform (1 x L).
grad::Var<float> waveform_objective(const grad::Var<float>& target, const grad::Var<float>& output,
                                    const SingConfig& config);

class Trainer {
 public:
  Trainer(const SingConfig& config, Model& model, std::vector<data::Example> train_set);

  /// Prepares a fresh optimiser for `stage` (and encoder targets for the
  /// LSTM stage).
  void begin_stage(Stage stage);
  /// One shuffled pass over the training set; returns the mean sample loss.
  /// Throws numerical-failure on a non-finite loss or gradient.
  double train_epoch(std::size_t epoch);
  /// One optimiser update on the given examples (one update per TBPTT
  /// segment in the LSTM stage). Returns the mean sample loss.
  double train_batch(std::span<const std::size_t> indices);

  Stage stage() const { return stage_; }
  Adam& optimizer() { return *adam_; }
  const std::vector<Tensor<float>>& lstm_targets() const { return targets_; }

 private:
  double autoencoder_batch(std::span<const std::size_t> indices);
  double lstm_batch(std::span<const std::size_t> indices);
  double finetune_batch(std::span<const std::size_t> indices);
  void update();

  SingConfig config_;
  Model& model_;
  std::vector<data::Example> train_;
  std::vector<Tensor<float>> inputs_;  // cached 1 x L waveforms
  Stage stage_ = Stage::kAutoencoder;
  ParameterList<float> params_;
  std::optional<Adam> adam_;
  std::vector<Tensor<float>> targets_;  // encoder sequences, LSTM stage only
};

// ---------------------------------------------------------------------------
// Run directory: config.json, train.log (one JSON record per epoch) and one
// <stage>.ckpt per stage, rewritten after every epoch.

struct EpochRecord {
  Stage stage = Stage::kAutoencoder;
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double wall_time = 0.0;  // seconds spent in the epoch

  nlohmann::json to_json() const;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, Stage stage);
std::filesystem::path log_path(const std::filesystem::path& run_dir);
std::size_t stage_epochs(const TrainConfig& config, Stage stage);

/// Parameters and stage bookkeeping.
void restore_model(const ckpt::Checkpoint& c, Model& model);
ckpt::Checkpoint model_checkpoint(const SingConfig& config, Model& model);

struct StageOutcome {
  std::vector<double> losses;  // all epochs of the stage so far
  bool resumed = false;
  bool already_complete = false;
};

struct RunHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Stop after this many epochs in this invocation (for interruption tests).
  std::optional<std::size_t> epoch_budget;
};

/// Runs (or resumes) one stage in `run_dir`. A later stage needs the
/// previous stage's completed checkpoint, otherwise invalid-state.
StageOutcome run_stage(const SingConfig& config, const std::vector<data::Example>& train_set, Stage stage,
                       const std::filesystem::path& run_dir, const RunHooks& hooks = {});

// ---------------------------------------------------------------------------
// Evaluation

struct Metrics {
  double spectral_loss = 0.0;
  double waveform_mse = 0.0;
  double itakura_saito = 0.0;
  std::size_t count = 0;
};

/// Mean metrics of `render(example)` against each example's audio.
Metrics evaluate(const std::vector<data::Example>& examples,
                 const std::function<dsp::Waveform(const data::Example&)>& render,
                 const losses::SpectralParams& params);
Metrics evaluate_sing(Model& model, const std::vector<data::Example>& examples);
Metrics evaluate_autoencoder(Model& model, const std::vector<data::Example>& examples);

}  // namespace sing::train
