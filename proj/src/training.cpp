#include "sing/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "sing/error.hpp"
#include "sing/losses.hpp"

namespace sing::train {

using grad::Var;
using nlohmann::json;

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kAutoencoder: return "autoencoder";
    case Stage::kLstm: return "lstm";
    case Stage::kFinetune: return "finetune";
  }
  return "?";
}

Stage stage_from_string(const std::string& name) {
  for (Stage s : kStages) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorKind::kInvalidInput, "unknown stage '" + name + "' (expected autoencoder, lstm or finetune)");
}

AdamParams adam_params(const TrainConfig& c) { return {c.learning_rate, c.beta1, c.beta2, c.adam_epsilon}; }

// ---------------------------------------------------------------------------

Adam::Adam(ParameterList<float> params, AdamParams hp) : params_(std::move(params)), hp_(hp) {
  for (const auto* p : params_) {
    m_.emplace_back(p->value().shape());
    v_.emplace_back(p->value().shape());
  }
}

void Adam::step() {
  for (const auto* p : params_) {
    if (!p->grad_populated() || p->grad().size() != p->size()) {
      fail(ErrorKind::kInvalidState, "Adam step: parameter " + p->name() + " has no gradient");
    }
  }
  ++steps_;
  const double t = static_cast<double>(steps_);
  const float alpha = static_cast<float>(hp_.learning_rate / (1.0 - std::pow(hp_.beta1, t)));
  const float v_correction = static_cast<float>(1.0 / (1.0 - std::pow(hp_.beta2, t)));
  const float b1 = static_cast<float>(hp_.beta1);
  const float b2 = static_cast<float>(hp_.beta2);
  const float eps = static_cast<float>(hp_.epsilon);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    float* w = params_[k]->value().data();
    const float* g = params_[k]->grad().data();
    float* m = m_[k].data();
    float* v = v_[k].data();
    for (std::size_t i = 0, n = params_[k]->size(); i < n; ++i) {
      m[i] = b1 * m[i] + (1.0f - b1) * g[i];
      v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
      w[i] -= alpha * m[i] / (std::sqrt(v[i] * v_correction) + eps);
    }
  }
}

void Adam::save(ckpt::Checkpoint& c) const {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    c.put("adam.m/" + params_[k]->name(), m_[k]);
    c.put("adam.v/" + params_[k]->name(), v_[k]);
  }
  c.state["adam_steps"] = steps_;
}

void Adam::load(const ckpt::Checkpoint& c) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    for (auto [prefix, dest] : {std::pair{"adam.m/", &m_[k]}, std::pair{"adam.v/", &v_[k]}}) {
      const auto* t = c.find(prefix + params_[k]->name());
      if (!t || t->value.shape() != dest->shape()) {
        fail(ErrorKind::kInvalidInput, std::string("checkpoint lacks optimizer state ") + prefix + params_[k]->name());
      }
      *dest = t->value;
    }
  }
  steps_ = c.state.value("adam_steps", std::uint64_t{0});
}

double clip_grad_norm(std::span<grad::Parameter<float>* const> params, double max_norm) {
  double sq = 0.0;
  for (const auto* p : params) {
    if (!p->grad_populated()) continue;
    for (float g : p->grad().values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float scale = static_cast<float>(max_norm / norm);
    for (auto* p : params) {
      if (!p->grad_populated()) continue;
      for (float& g : p->grad().values()) g *= scale;
    }
  }
  return norm;
}

ParameterList<float> stage_parameters(Model& model, Stage stage) {
  ParameterList<float> out;
  auto append = [&](const ParameterList<float>& more) { out.insert(out.end(), more.begin(), more.end()); };
  switch (stage) {
    case Stage::kAutoencoder:
      append(model.encoder_parameters());
      append(model.decoder_parameters());
      break;
    case Stage::kLstm:
      append(model.generator_parameters());
      break;
    case Stage::kFinetune:
      append(model.generator_parameters());
      append(model.decoder_parameters());
      break;
  }
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, Stage stage, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stage), static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  // Explicit Fisher-Yates; std::shuffle's sequence is implementation-defined.
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

Var<float> waveform_objective(const Var<float>& target, const Var<float>& output, const SingConfig& config) {
  if (config.train.loss == LossKind::kWaveform) return losses::waveform_mse(target, output);
  return losses::spectral_loss(target, output, config.model.spectral());
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const SingConfig& config, Model& model, std::vector<data::Example> train_set)
    : config_(config), model_(model), train_(std::move(train_set)) {
  for (const auto& e : train_) {
    model::validate_label(e.label, config_.model);
    require(e.audio.size() == config_.model.signal_length,
            "training example " + model::to_string(e.label) + " has " + std::to_string(e.audio.size()) +
                " samples, expected " + std::to_string(config_.model.signal_length));
    inputs_.push_back(model::waveform_tensor<float>(e.audio));
  }
}

void Trainer::begin_stage(Stage stage) {
  stage_ = stage;
  params_ = stage_parameters(model_, stage);
  adam_.emplace(params_, adam_params(config_.train));
  targets_.clear();
  if (stage == Stage::kLstm) {
    grad::NoGradGuard guard;
    for (const auto& x : inputs_) targets_.push_back(model_.encode(Var<float>(x)).value());
  }
}

void Trainer::update() {
  if (stage_ != Stage::kAutoencoder) clip_grad_norm(params_, config_.train.clip_norm);
  adam_->step();
}

double Trainer::train_epoch(std::size_t epoch) {
  require(adam_.has_value(), "train_epoch called before begin_stage");
  require(!train_.empty(), "training set is empty");
  const auto order = epoch_order(train_.size(), config_.train.seed, stage_, epoch);
  const std::size_t b = config_.train.batch_size;
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += b) {
    const std::size_t end = std::min(order.size(), start + b);
    const std::span<const std::size_t> batch(order.data() + start, end - start);
    total += train_batch(batch) * static_cast<double>(batch.size());
  }
  const double mean = total / static_cast<double>(order.size());
  if (!std::isfinite(mean)) {
    fail(ErrorKind::kNumericalFailure, to_string(stage_) + " epoch " + std::to_string(epoch + 1) + " loss is not finite");
  }
  return mean;
}

double Trainer::train_batch(std::span<const std::size_t> indices) {
  require(adam_.has_value(), "train_batch called before begin_stage");
  require(!indices.empty(), "empty batch");
  double loss = 0.0;
  switch (stage_) {
    case Stage::kAutoencoder: loss = autoencoder_batch(indices); break;
    case Stage::kLstm: loss = lstm_batch(indices); break;
    case Stage::kFinetune: loss = finetune_batch(indices); break;
  }
  if (!std::isfinite(loss)) fail(ErrorKind::kNumericalFailure, to_string(stage_) + " batch loss is not finite");
  return loss;
}

double Trainer::autoencoder_batch(std::span<const std::size_t> indices) {
  grad::zero_grads<float>(params_);
  const float weight = 1.0f / static_cast<float>(indices.size());
  double total = 0.0;
  for (std::size_t i : indices) {
    Var<float> x(inputs_[i]);
    Var<float> loss = waveform_objective(x, model_.autoencode(x), config_);
    total += loss.value().item();
    grad::backward(grad::scale(loss, weight));
  }
  update();
  return total / static_cast<double>(indices.size());
}

double Trainer::finetune_batch(std::span<const std::size_t> indices) {
  grad::zero_grads<float>(params_);
  const float weight = 1.0f / static_cast<float>(indices.size());
  double total = 0.0;
  for (std::size_t i : indices) {
    Var<float> loss = waveform_objective(Var<float>(inputs_[i]), model_.synthesize(train_[i].label), config_);
    total += loss.value().item();
    grad::backward(grad::scale(loss, weight));
  }
  update();
  return total / static_cast<double>(indices.size());
}

double Trainer::lstm_batch(std::span<const std::size_t> indices) {
  const std::size_t n = config_.model.seq_len;
  const std::size_t segment = config_.train.tbptt_len;
  const auto& generator = model_.generator();
  const float weight = 1.0f / static_cast<float>(indices.size());

  std::vector<std::vector<nn::LstmState<float>>> states(indices.size());
  std::vector<Var<float>> targets;
  for (std::size_t i : indices) targets.emplace_back(targets_[i]);
  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += segment) {
    const std::size_t end = std::min(n, begin + segment);
    const double share = static_cast<double>(end - begin) / static_cast<double>(n);
    grad::zero_grads<float>(params_);
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const auto& label = train_[indices[k]].label;
      auto out = generator.forward_segment(generator.inputs(label), begin, end, states[k]);
      Var<float> loss = losses::embedding_mse(out.sequence, grad::slice(targets[k], 1, begin, end));
      total += loss.value().item() * share;
      grad::backward(grad::scale(loss, weight));
      states[k].clear();
      if (config_.train.tbptt_carry_state) {
        for (const auto& s : out.states) states[k].push_back({grad::detach(s.h), grad::detach(s.c)});
      }
    }
    update();
  }
  return total / static_cast<double>(indices.size());
}

// ---------------------------------------------------------------------------

json EpochRecord::to_json() const {
  return json{{"stage", to_string(stage)}, {"epoch", epoch}, {"loss", loss}, {"wall_time", wall_time}};
}

std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, Stage stage) {
  return run_dir / (to_string(stage) + ".ckpt");
}

std::filesystem::path log_path(const std::filesystem::path& run_dir) { return run_dir / "train.log"; }

std::size_t stage_epochs(const TrainConfig& c, Stage stage) {
  switch (stage) {
    case Stage::kAutoencoder: return c.epochs_autoencoder;
    case Stage::kLstm: return c.epochs_lstm;
    case Stage::kFinetune: return c.epochs_finetune;
  }
  return 0;
}

void restore_model(const ckpt::Checkpoint& c, Model& model) {
  ckpt::load_parameters(c, model.parameters(), "model/");
}

ckpt::Checkpoint model_checkpoint(const SingConfig& config, Model& model) {
  ckpt::Checkpoint c;
  c.config = config;
  ckpt::store_parameters(c, model.parameters(), "model/");
  return c;
}

namespace {

void check_same_config(const SingConfig& stored, const SingConfig& wanted, const std::filesystem::path& path) {
  if (to_json(stored) != to_json(wanted)) {
    fail(ErrorKind::kInvalidState,
         "checkpoint " + path.string() + " was trained with a different config; use a fresh run directory");
  }
}

void append_log(const std::filesystem::path& run_dir, const json& record) {
  std::ofstream out(log_path(run_dir), std::ios::app);
  if (!out) fail(ErrorKind::kIo, "cannot append to " + log_path(run_dir).string());
  out << record.dump() << "\n";
}

}  // namespace

StageOutcome run_stage(const SingConfig& config, const std::vector<data::Example>& train_set, Stage stage,
                       const std::filesystem::path& run_dir, const RunHooks& hooks) {
  std::error_code ec;
  std::filesystem::create_directories(run_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create run directory " + run_dir.string() + ": " + ec.message());

  Model model(config.model);
  Trainer trainer(config, model, train_set);
  StageOutcome out;
  std::size_t done = 0;
  const auto path = checkpoint_path(run_dir, stage);

  if (std::filesystem::exists(path)) {
    const auto c = ckpt::load(path);
    check_same_config(c.config, config, path);
    restore_model(c, model);
    out.losses = c.state.value("losses", std::vector<double>{});
    done = c.state.value("epochs_done", std::size_t{0});
    if (c.state.value("complete", false)) {
      out.already_complete = true;
      return out;
    }
    trainer.begin_stage(stage);
    trainer.optimizer().load(c);
    out.resumed = true;
  } else {
    if (stage != Stage::kAutoencoder) {
      const Stage previous = stage == Stage::kLstm ? Stage::kAutoencoder : Stage::kLstm;
      const auto prev_path = checkpoint_path(run_dir, previous);
      bool complete = false;
      ckpt::Checkpoint prev;
      if (std::filesystem::exists(prev_path)) {
        prev = ckpt::load(prev_path);
        complete = prev.state.value("complete", false);
      }
      if (!complete) {
        fail(ErrorKind::kInvalidState, "stage " + to_string(stage) + " needs a completed " + to_string(previous) +
                                           " stage in " + run_dir.string() + " (missing or unfinished " +
                                           prev_path.filename().string() + ")");
      }
      check_same_config(prev.config, config, prev_path);
      restore_model(prev, model);
    }
    trainer.begin_stage(stage);
  }

  const std::size_t total = stage_epochs(config.train, stage);
  std::size_t budget = hooks.epoch_budget.value_or(std::numeric_limits<std::size_t>::max());
  auto save = [&](std::size_t epochs_done) {
    ckpt::Checkpoint c = model_checkpoint(config, model);
    trainer.optimizer().save(c);
    c.state["stage"] = to_string(stage);
    c.state["epochs_done"] = epochs_done;
    c.state["epochs_total"] = total;
    c.state["complete"] = epochs_done >= total;
    c.state["losses"] = out.losses;
    ckpt::save(c, path);
  };
  if (done >= total) save(done);

  for (std::size_t epoch = done; epoch < total && budget > 0; ++epoch, --budget) {
    const auto t0 = std::chrono::steady_clock::now();
    double loss = 0.0;
    try {
      loss = trainer.train_epoch(epoch);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumericalFailure) throw;
      append_log(run_dir, json{{"stage", to_string(stage)}, {"epoch", epoch + 1}, {"error", e.what()}});
      fail(ErrorKind::kNumericalFailure, to_string(stage) + " diverged in epoch " + std::to_string(epoch + 1) + " (" +
                                             e.what() + "); last good checkpoint kept at " + path.string());
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.losses.push_back(loss);
    save(epoch + 1);
    const EpochRecord record{stage, epoch + 1, loss, seconds};
    append_log(run_dir, record.to_json());
    if (hooks.on_epoch) hooks.on_epoch(record);
  }
  return out;
}

// ---------------------------------------------------------------------------

Metrics evaluate(const std::vector<data::Example>& examples,
                 const std::function<dsp::Waveform(const data::Example&)>& render,
                 const losses::SpectralParams& params) {
  Metrics m;
  for (const auto& e : examples) {
    const dsp::Waveform y = render(e);
    m.spectral_loss += losses::spectral_loss(e.audio, y, params);
    m.waveform_mse += losses::waveform_mse(e.audio, y);
    m.itakura_saito += losses::itakura_saito(e.audio, y, params);
    ++m.count;
  }
  if (m.count > 0) {
    const double n = static_cast<double>(m.count);
    m.spectral_loss /= n;
    m.waveform_mse /= n;
    m.itakura_saito /= n;
  }
  return m;
}

Metrics evaluate_sing(Model& model, const std::vector<data::Example>& examples) {
  grad::NoGradGuard guard;
  const int rate = model.config().sample_rate;
  return evaluate(
      examples, [&](const data::Example& e) { return model::to_waveform(model.synthesize(e.label).value(), rate); },
      model.config().spectral());
}

Metrics evaluate_autoencoder(Model& model, const std::vector<data::Example>& examples) {
  grad::NoGradGuard guard;
  const int rate = model.config().sample_rate;
  return evaluate(
      examples,
      [&](const data::Example& e) {
        return model::to_waveform(model.autoencode(Var<float>(model::waveform_tensor<float>(e.audio))).value(), rate);
      },
      model.config().spectral());
}

}  // namespace sing::train
