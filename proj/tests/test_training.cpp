#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "sing/ops.hpp"
#include "sing/training.hpp"

using namespace sing;
using namespace sing::train;
using sing::grad::Parameter;
using sing::grad::Var;
using sing::testing::TempDir;
using sing::testing::read_bytes;
using sing::testing::tiny_sing_config;

namespace {

// Populates p.grad() with g through an actual backward pass.
void set_grad(Parameter<float>& p, const std::vector<float>& g) {
  Tensor<float> t(p.value().shape());
  std::copy(g.begin(), g.end(), t.data());
  p.zero_grad();
  grad::backward(grad::sum(grad::mul(p.var(), Var<float>(t))));
}

Parameter<float> make_param(std::vector<float> init) {
  Tensor<float> t({1, init.size()});
  std::copy(init.begin(), init.end(), t.data());
  return Parameter<float>("w", t);
}

std::vector<data::Example> tiny_train_set(const SingConfig& c) {
  const auto& m = c.model;
  auto split = data::apply_split(
      data::generate_corpus(c),
      data::pitch_completion_split(m.n_instruments, m.n_pitches, c.data.holdout_fraction, c.data.seed));
  return split.train;
}

std::vector<float> tensor_values(const ckpt::Checkpoint& c, const std::string& name) {
  const auto* t = c.find(name);
  REQUIRE(t != nullptr);
  return {t->value.data(), t->value.data() + t->value.size()};
}

bool same_group(const ckpt::Checkpoint& a, const ckpt::Checkpoint& b, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& t : a.tensors) {
    if (!t.name.starts_with(prefix)) continue;
    ++n;
    if (tensor_values(a, t.name) != tensor_values(b, t.name)) return false;
  }
  REQUIRE(n > 0);
  return true;
}

}  // namespace

TEST_CASE("Adam: zero gradient leaves parameters unchanged and decays the moments") {
  auto p = make_param({0.5f, -1.0f});
  Adam adam({&p}, AdamParams{});
  set_grad(p, {0.2f, -0.4f});
  adam.step();
  const auto after_first = std::vector<float>(p.value().data(), p.value().data() + 2);
  ckpt::Checkpoint c1;
  adam.save(c1);

  set_grad(p, {0.0f, 0.0f});
  adam.step();
  CHECK(std::vector<float>(p.value().data(), p.value().data() + 2) != after_first);  // momentum still moves it
  ckpt::Checkpoint c2;
  adam.save(c2);
  const auto m1 = tensor_values(c1, "adam.m/w");
  const auto m2 = tensor_values(c2, "adam.m/w");
  const auto v1 = tensor_values(c1, "adam.v/w");
  const auto v2 = tensor_values(c2, "adam.v/w");
  for (int i = 0; i < 2; ++i) {
    CHECK(m2[i] == doctest::Approx(0.9 * m1[i]).epsilon(1e-6));
    CHECK(v2[i] == doctest::Approx(0.999 * v1[i]).epsilon(1e-6));
  }

  // From a fresh state, zero gradients never move anything.
  auto q = make_param({0.5f, -1.0f});
  Adam fresh({&q}, AdamParams{});
  for (int s = 0; s < 5; ++s) {
    set_grad(q, {0.0f, 0.0f});
    fresh.step();
  }
  CHECK(q.value().data()[0] == 0.5f);
  CHECK(q.value().data()[1] == -1.0f);
  CHECK(fresh.steps() == 5);
}

TEST_CASE("Adam: constant gradient moves each weight by lr * sign(g) per step") {
  AdamParams hp;
  hp.learning_rate = 1e-3;
  auto p = make_param({0.0f, 0.0f, 0.0f});
  Adam adam({&p}, hp);
  const std::vector<float> g = {2.5f, -0.01f, 300.0f};
  for (int step = 1; step <= 1000; ++step) {
    const std::vector<float> before(p.value().data(), p.value().data() + 3);
    set_grad(p, g);
    adam.step();
    if (step == 1 || step == 1000) {
      for (int i = 0; i < 3; ++i) {
        const double delta = p.value().data()[i] - before[i];
        CHECK(delta == doctest::Approx(-hp.learning_rate * (g[i] > 0 ? 1 : -1)).epsilon(1e-3));
      }
    }
  }
}

TEST_CASE("Adam matches a 64-bit reference implementation on a varying gradient sequence") {
  AdamParams hp;
  hp.learning_rate = 0.01;
  auto p = make_param({0.3f, -0.7f});
  Adam adam({&p}, hp);
  double w[2] = {0.3, -0.7}, m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 50; ++t) {
    const std::vector<float> g = {static_cast<float>(std::sin(0.3 * t)), static_cast<float>(0.1 * std::cos(t))};
    set_grad(p, g);
    adam.step();
    for (int i = 0; i < 2; ++i) {
      m[i] = hp.beta1 * m[i] + (1 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1 - hp.beta2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(hp.beta1, t));
      const double vh = v[i] / (1 - std::pow(hp.beta2, t));
      w[i] -= hp.learning_rate * mh / (std::sqrt(vh) + hp.epsilon);
    }
  }
  CHECK(p.value().data()[0] == doctest::Approx(w[0]).epsilon(1e-4));
  CHECK(p.value().data()[1] == doctest::Approx(w[1]).epsilon(1e-4));
}

TEST_CASE("Adam: missing gradient is an invalid-state error") {
  auto p = make_param({1.0f});
  auto q = make_param({1.0f});
  Adam adam({&p, &q}, AdamParams{});
  set_grad(p, {1.0f});
  q.zero_grad();
  try {
    adam.step();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidState);
  }
  CHECK(adam.steps() == 0);
  CHECK(p.value().data()[0] == 1.0f);
}

TEST_CASE("Adam state round-trips through a checkpoint") {
  auto a = make_param({0.1f, 0.2f});
  auto b = make_param({0.1f, 0.2f});
  Adam first({&a}, AdamParams{});
  for (int t = 0; t < 3; ++t) {
    set_grad(a, {0.5f, -0.25f * t});
    first.step();
  }
  ckpt::Checkpoint c;
  first.save(c);
  c = ckpt::deserialize(ckpt::serialize(c));
  std::copy(a.value().data(), a.value().data() + 2, b.value().data());
  Adam second({&b}, AdamParams{});
  second.load(c);
  CHECK(second.steps() == 3);
  for (int t = 0; t < 3; ++t) {
    set_grad(a, {-0.3f, 0.7f});
    set_grad(b, {-0.3f, 0.7f});
    first.step();
    second.step();
  }
  CHECK(a.value().data()[0] == b.value().data()[0]);
  CHECK(a.value().data()[1] == b.value().data()[1]);
}

TEST_CASE("global gradient clipping") {
  auto p = make_param({0.0f, 0.0f});
  auto q = make_param({0.0f});
  grad::ParameterList<float> params = {&p, &q};
  set_grad(p, {3.0f, 0.0f});
  set_grad(q, {4.0f});
  CHECK(clip_grad_norm(params, 1.0) == doctest::Approx(5.0));
  CHECK(p.grad().data()[0] == doctest::Approx(0.6));
  CHECK(q.grad().data()[0] == doctest::Approx(0.8));

  set_grad(p, {3.0f, 0.0f});
  set_grad(q, {4.0f});
  CHECK(clip_grad_norm(params, 10.0) == doctest::Approx(5.0));
  CHECK(q.grad().data()[0] == 4.0f);
  CHECK(clip_grad_norm(params, 0.0) == doctest::Approx(5.0));  // disabled
  CHECK(q.grad().data()[0] == 4.0f);
}

TEST_CASE("epoch order is a deterministic permutation keyed by seed, stage and epoch") {
  const auto a = epoch_order(100, 7, Stage::kAutoencoder, 0);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(100);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);
  CHECK(a == epoch_order(100, 7, Stage::kAutoencoder, 0));
  CHECK(a != epoch_order(100, 7, Stage::kAutoencoder, 1));
  CHECK(a != epoch_order(100, 7, Stage::kLstm, 0));
  CHECK(a != epoch_order(100, 8, Stage::kAutoencoder, 0));
  CHECK(a != iota);
}

TEST_CASE("stage isolation: lstm touches only the generator, finetune never the encoder") {
  const SingConfig cfg = tiny_sing_config();
  const auto train_set = tiny_train_set(cfg);
  TempDir dir("isolation");
  for (Stage s : kStages) run_stage(cfg, train_set, s, dir.path());
  const auto ae = ckpt::load(checkpoint_path(dir.path(), Stage::kAutoencoder));
  const auto lstm = ckpt::load(checkpoint_path(dir.path(), Stage::kLstm));
  const auto ft = ckpt::load(checkpoint_path(dir.path(), Stage::kFinetune));

  CHECK(same_group(ae, lstm, "model/encoder."));
  CHECK(same_group(ae, lstm, "model/decoder."));
  CHECK_FALSE(same_group(ae, lstm, "model/generator."));
  CHECK(same_group(lstm, ft, "model/encoder."));
  CHECK_FALSE(same_group(lstm, ft, "model/decoder."));
  CHECK_FALSE(same_group(lstm, ft, "model/generator."));
  for (const auto* c : {&ae, &lstm, &ft}) CHECK(c->state.at("complete").get<bool>());
}

TEST_CASE("fixed seed gives bit-identical loss logs and checkpoints") {
  const SingConfig cfg = tiny_sing_config();
  const auto train_set = tiny_train_set(cfg);
  TempDir a("det_a"), b("det_b");
  std::vector<std::vector<double>> losses_a, losses_b;
  for (Stage s : kStages) {
    losses_a.push_back(run_stage(cfg, train_set, s, a.path()).losses);
    losses_b.push_back(run_stage(cfg, train_set, s, b.path()).losses);
  }
  CHECK(losses_a == losses_b);
  for (Stage s : kStages) {
    CHECK(read_bytes(checkpoint_path(a.path(), s)) == read_bytes(checkpoint_path(b.path(), s)));
  }
  for (const auto& l : losses_a) {
    for (double v : l) CHECK(std::isfinite(v));
  }

  SingConfig reseeded = cfg;
  reseeded.train.seed += 1;
  TempDir c("det_c");
  CHECK(run_stage(reseeded, train_set, Stage::kAutoencoder, c.path()).losses != losses_a[0]);
}

TEST_CASE("interrupted stages resume bit-identically") {
  const SingConfig cfg = tiny_sing_config();
  const auto train_set = tiny_train_set(cfg);
  TempDir straight("straight"), resumed("resumed");
  RunHooks one;
  one.epoch_budget = 1;
  for (Stage s : kStages) {
    const auto full = run_stage(cfg, train_set, s, straight.path());
    const auto part = run_stage(cfg, train_set, s, resumed.path(), one);
    CHECK(part.losses.size() == 1);
    const auto ckpt_mid = ckpt::load(checkpoint_path(resumed.path(), s));
    CHECK_FALSE(ckpt_mid.state.at("complete").get<bool>());
    const auto rest = run_stage(cfg, train_set, s, resumed.path());
    CHECK(rest.resumed);
    CHECK(rest.losses == full.losses);
    CHECK(read_bytes(checkpoint_path(straight.path(), s)) == read_bytes(checkpoint_path(resumed.path(), s)));
    const auto again = run_stage(cfg, train_set, s, resumed.path());
    CHECK(again.already_complete);
  }
}

TEST_CASE("run_stage refuses out-of-order stages and config changes") {
  const SingConfig cfg = tiny_sing_config();
  const auto train_set = tiny_train_set(cfg);
  TempDir dir("order");
  try {
    run_stage(cfg, train_set, Stage::kFinetune, dir.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidState);
    CHECK(std::string(e.what()).find("lstm") != std::string::npos);
  }
  RunHooks one;
  one.epoch_budget = 1;
  run_stage(cfg, train_set, Stage::kAutoencoder, dir.path(), one);
  try {
    run_stage(cfg, train_set, Stage::kLstm, dir.path());  // autoencoder unfinished
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidState);
    CHECK(std::string(e.what()).find("autoencoder") != std::string::npos);
  }
  SingConfig changed = cfg;
  changed.train.learning_rate *= 2;
  try {
    run_stage(changed, train_set, Stage::kAutoencoder, dir.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidState);
  }
}

TEST_CASE("a non-finite loss aborts the stage and keeps the last good checkpoint") {
  const SingConfig cfg = tiny_sing_config();
  const auto train_set = tiny_train_set(cfg);
  TempDir dir("nan");
  RunHooks one;
  one.epoch_budget = 1;
  run_stage(cfg, train_set, Stage::kAutoencoder, dir.path(), one);
  const auto path = checkpoint_path(dir.path(), Stage::kAutoencoder);

  // Blow up a weight so the forward pass overflows to infinity.
  auto c = ckpt::load(path);
  for (auto& t : c.tensors) {
    if (t.name == "model/encoder.frame.weight") t.value.fill(3e37f);
  }
  ckpt::save(c, path);
  const auto good = read_bytes(path);
  try {
    run_stage(cfg, train_set, Stage::kAutoencoder, dir.path());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumericalFailure);
  }
  CHECK(read_bytes(path) == good);
  std::ifstream log(log_path(dir.path()));
  std::string line, last;
  while (std::getline(log, line)) last = line;
  CHECK(last.find("error") != std::string::npos);
}

TEST_CASE("the epoch log has one structured record per epoch") {
  const SingConfig cfg = tiny_sing_config();
  const auto train_set = tiny_train_set(cfg);
  TempDir dir("log");
  std::vector<EpochRecord> seen;
  RunHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) { seen.push_back(r); };
  const auto out = run_stage(cfg, train_set, Stage::kAutoencoder, dir.path(), hooks);
  REQUIRE(seen.size() == cfg.train.epochs_autoencoder);
  std::ifstream log(log_path(dir.path()));
  std::string line;
  std::size_t n = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("stage") == "autoencoder");
    CHECK(j.at("epoch") == n + 1);
    CHECK(j.at("loss").get<double>() == out.losses[n]);
    CHECK(j.at("wall_time").get<double>() >= 0.0);
    ++n;
  }
  CHECK(n == seen.size());
}

TEST_CASE("state carry across TBPTT segments is a real switch") {
  SingConfig carry = tiny_sing_config();
  const auto train_set = tiny_train_set(carry);
  SingConfig reset = carry;
  reset.train.tbptt_carry_state = false;
  TempDir a("carry"), b("reset");
  run_stage(carry, train_set, Stage::kAutoencoder, a.path());
  std::filesystem::copy(a.path(), b.path(), std::filesystem::copy_options::overwrite_existing | std::filesystem::copy_options::recursive);
  // The reset run needs its own autoencoder checkpoint under its own config.
  auto c = ckpt::load(checkpoint_path(b.path(), Stage::kAutoencoder));
  c.config = reset;
  ckpt::save(c, checkpoint_path(b.path(), Stage::kAutoencoder));
  const auto la = run_stage(carry, train_set, Stage::kLstm, a.path()).losses;
  const auto lb = run_stage(reset, train_set, Stage::kLstm, b.path()).losses;
  CHECK(la != lb);
}

TEST_CASE("evaluation of a perfect renderer is all zeros") {
  const SingConfig cfg = tiny_sing_config();
  const auto train_set = tiny_train_set(cfg);
  const auto m = evaluate(train_set, [](const data::Example& e) { return e.audio; }, cfg.model.spectral());
  CHECK(m.count == train_set.size());
  CHECK(m.spectral_loss == 0.0);
  CHECK(m.waveform_mse == 0.0);
  CHECK(m.itakura_saito == doctest::Approx(0.0).epsilon(1e-12));

  Model model(cfg.model);
  const auto a = evaluate_sing(model, train_set);
  const auto b = evaluate_sing(model, train_set);
  CHECK(a.spectral_loss == b.spectral_loss);
  CHECK(a.waveform_mse == b.waveform_mse);
  CHECK(a.spectral_loss > 0.0);
}
