#include <cmath>
#include <random>

#include "doctest.h"
#include "sing/config.hpp"
#include "sing/losses.hpp"
#include "sing/model.hpp"

using namespace sing;
using namespace sing::grad;
using sing::model::NoteLabel;
using sing::model::SingModel;

namespace {

Tensor<double> random_wave(std::size_t n, std::uint64_t seed, double amp = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-amp, amp);
  Tensor<double> t({1, n});
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

// Small geometry that keeps every layer type, for exhaustive checks.
ModelConfig tiny_config() {
  ModelConfig m = SingConfig::preset_named("toy").model;
  m.signal_length = 256;
  m.kernel = 32;
  m.stride = 8;
  m.seq_len = 33;  // 32 * 8 + 32 = 288 = 256 + 2 * 16
  m.channels = 6;
  m.seq_dim = 3;
  m.lstm_hidden = 5;
  m.embed = {2, 2, 2, 2};
  m.loss_frame = 64;
  m.loss_hop = 16;
  return m;
}

// Zero-initialised biases put pre-activations exactly on ReLU kinks (for
// example a frame lying entirely in the zero padding), where central
// differences average the two one-sided slopes. Check at a generic point.
void jitter_biases(SingModel<double>& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (auto* p : m.parameters()) {
    if (p->name().ends_with(".bias")) {
      for (auto& v : p->value().values()) v += dist(rng);
    }
  }
}

double norm(const Tensor<double>& t) {
  double acc = 0.0;
  for (double v : t.values()) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("presets satisfy the length algebra") {
  const ModelConfig paper = SingConfig::preset_named("paper").model;
  CHECK(paper.raw_length() == 68608);
  CHECK(paper.padding() == 2304);
  CHECK(paper.lstm_input() == 30);
  const ModelConfig toy = SingConfig::preset_named("toy").model;
  CHECK(toy.raw_length() == 8448);
  CHECK(toy.padding() == 128);
  CHECK(toy.lstm_input() == 16);
  CHECK_NOTHROW(SingConfig::preset_named("paper").validate());
  CHECK_NOTHROW(SingConfig::preset_named("toy").validate());
  CHECK_THROWS_AS(SingConfig::preset_named("huge"), Error);

  ModelConfig short_seq = toy;
  short_seq.seq_len = 120;
  CHECK_THROWS_AS(short_seq.validate(), Error);
  ModelConfig odd_pad = toy;
  odd_pad.signal_length = 8191;
  CHECK_THROWS_AS(odd_pad.validate(), Error);
  ModelConfig ratio = toy;
  ratio.stride = 128;
  CHECK_THROWS_AS(ratio.validate(), Error);
}

TEST_CASE("config json round trip and overrides") {
  SingConfig c = SingConfig::preset_named("toy");
  c.train.loss = LossKind::kWaveform;
  c.model.time_embedding = false;
  c.train.seed = 77;
  const SingConfig back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  const SingConfig partial = config_from_json(nlohmann::json::parse(R"({"preset":"paper","train":{"batch_size":8}})"));
  CHECK(partial.model.channels == 4096);
  CHECK(partial.train.batch_size == 8);
  CHECK(partial.train.learning_rate == 3e-4);

  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"model":{"chanels":3}})")), Error);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"schema_version":9})")), Error);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"train":{"loss":"l2"}})")), Error);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"model":{"seq_len":"long"}})")), Error);
}

TEST_CASE("toy shape round trip") {
  const ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<float> m(cfg);
  Var<float> x(random_wave(cfg.signal_length, 1).cast<float>());
  const Var<float> e = m.encode(x);
  CHECK(e.dim(0) == cfg.seq_dim);
  CHECK(e.dim(1) == cfg.seq_len);
  CHECK(m.decode(e).dim(1) == cfg.signal_length);
  CHECK(m.synthesize({1, 3, 15}).dim(1) == cfg.signal_length);

  CHECK_THROWS_AS(m.encode(Var<float>(Tensor<float>({1, cfg.signal_length - 1}))), Error);
  CHECK_THROWS_AS(m.decode(Var<float>(Tensor<float>({cfg.seq_dim, cfg.seq_len + 1}))), Error);
}

TEST_CASE("zero inputs with zero biases give zero outputs") {
  const ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<double> m(cfg);
  const Var<double> e = m.encode(Var<double>(Tensor<double>({1, cfg.signal_length})));
  for (double v : e.value().values()) CHECK(v == 0.0);
  const Var<double> y = m.decode(Var<double>(Tensor<double>({cfg.seq_dim, cfg.seq_len})));
  for (double v : y.value().values()) CHECK(v == 0.0);
}

TEST_CASE("encoder output layer has no nonlinearity") {
  const ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<double> m(cfg);
  const Var<double> e = m.encode(Var<double>(random_wave(cfg.signal_length, 3)));
  std::size_t negative = 0;
  for (double v : e.value().values()) negative += v < 0.0;
  CHECK(negative > 0);
}

TEST_CASE("labels") {
  const ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<double> m(cfg);
  CHECK_THROWS_AS(m.synthesize({2, 0, 0}), Error);
  CHECK_THROWS_AS(m.synthesize({0, 4, 0}), Error);
  CHECK_THROWS_AS(m.synthesize({0, 0, 16}), Error);
  try {
    m.generate({0, 0, 99});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidArgument);
    CHECK(std::string(e.what()).find("pitch in [0, 16)") != std::string::npos);
  }

  SUBCASE("pitch enters every step") {
    const auto a = m.generate({0, 1, 2}).value();
    const auto b = m.generate({0, 1, 3}).value();
    for (std::size_t t = 0; t < cfg.seq_len; ++t) {
      double diff = 0.0;
      for (std::size_t d = 0; d < cfg.seq_dim; ++d) diff += std::abs(a.at(d, t) - b.at(d, t));
      CHECK(diff > 0.0);
    }
  }
  SUBCASE("deterministic") {
    CHECK(m.synthesize({1, 2, 3}).value() == m.synthesize({1, 2, 3}).value());
    SingModel<double> again(cfg);
    CHECK(again.synthesize({1, 2, 3}).value() == m.synthesize({1, 2, 3}).value());
  }
}

TEST_CASE("outputs finite across many labels") {
  const ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<float> m(cfg);
  NoGradGuard guard;
  std::size_t count = 0;
  for (std::size_t v = 0; v < cfg.n_velocities; ++v) {
    for (std::size_t i = 0; i < cfg.n_instruments; ++i) {
      for (std::size_t p = 0; p < cfg.n_pitches && count < 100; p += 1, ++count) {
        CHECK(m.synthesize({v, i, p}).value().all_finite());
      }
    }
  }
  CHECK(count == 100);
}

TEST_CASE("parameter counts") {
  for (const char* name : {"toy", "paper"}) {
    const auto counts = model::analytic_parameter_count(SingConfig::preset_named(name).model);
    CHECK(counts.total == counts.deployed + counts.groups.at("encoder"));
  }
  const ModelConfig toy = SingConfig::preset_named("toy").model;
  SingModel<float> m(toy);
  const auto built = m.count_parameters();
  const auto analytic = model::analytic_parameter_count(toy);
  CHECK(built.groups == analytic.groups);
  CHECK(built.total == analytic.total);
  // Per-layer sums written out for the toy preset.
  CHECK(built.groups.at("encoder") == (64 * 256 + 64) + 2 * (64 * 64 + 64) + (64 * 16 + 16));
  CHECK(built.groups.at("decoder") == (16 * 64 * 9 + 64) + 2 * (64 * 64 + 64) + (64 * 256 + 1));
  CHECK(built.groups.at("generator") ==
        (2 * 2 + 4 * 8 + 16 * 4 + 129 * 2) + (4 * 64 * 80 + 256) + (4 * 64 * 128 + 256) + (64 * 16 + 16));

  ModelConfig ablated = toy;
  ablated.time_embedding = false;
  SingModel<float> a(ablated);
  CHECK(a.count_parameters().groups.at("generator") ==
        built.groups.at("generator") - 129 * 2 - 4 * 64 * 2);
  CHECK(model::analytic_parameter_count(ablated).groups == a.count_parameters().groups);

  const auto paper = model::analytic_parameter_count(SingConfig::preset_named("paper").model);
  CHECK(paper.deployed >= 58'000'000);
  CHECK(paper.deployed <= 68'000'000);
}

TEST_CASE("ablation only narrows the LSTM input") {
  ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<double> full(cfg);
  cfg.time_embedding = false;
  SingModel<double> ablated(cfg);
  CHECK(full.generator().input_width() == 16);
  CHECK(ablated.generator().input_width() == 14);
  CHECK(ablated.generator().inputs({0, 0, 0}).dim(0) == 14);

  const auto fd = full.decoder_parameters();
  const auto ad = ablated.decoder_parameters();
  REQUIRE(fd.size() == ad.size());
  for (std::size_t k = 0; k < fd.size(); ++k) CHECK(fd[k]->value() == ad[k]->value());
  CHECK(ablated.synthesize({1, 1, 1}).dim(1) == cfg.signal_length);
}

TEST_CASE("segmented generation matches the full sequence") {
  const ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<double> m(cfg);
  const NoteLabel label{1, 2, 5};
  const auto full = m.generate(label).value();
  const auto inputs = m.generator().inputs(label);
  std::vector<nn::LstmState<double>> state;
  std::size_t begin = 0;
  while (begin < cfg.seq_len) {
    const std::size_t end = std::min(begin + 32, cfg.seq_len);
    auto seg = m.generator().forward_segment(inputs, begin, end, state);
    for (std::size_t t = begin; t < end; ++t) {
      for (std::size_t d = 0; d < cfg.seq_dim; ++d) {
        CHECK(seg.sequence.value().at(d, t - begin) == doctest::Approx(full.at(d, t)).epsilon(1e-12));
      }
    }
    state.clear();
    for (auto& s : seg.states) state.push_back({detach(s.h), detach(s.c)});
    begin = end;
  }
}

TEST_CASE("spectral loss reaches every parameter") {
  const ModelConfig cfg = SingConfig::preset_named("toy").model;
  SingModel<double> m(cfg);
  Var<double> target(random_wave(cfg.signal_length, 9));

  auto all = m.parameters();
  zero_grads<double>(all);
  backward(losses::spectral_loss(target, m.synthesize({1, 2, 3}), cfg.spectral()));
  for (auto* p : m.generator_parameters()) {
    // Only the looked-up rows of label tables receive gradient; the table as a whole must.
    CHECK_MESSAGE(norm(p->grad()) > 0.0, p->name());
  }
  for (auto* p : m.decoder_parameters()) CHECK_MESSAGE(norm(p->grad()) > 0.0, p->name());
  for (auto* p : m.encoder_parameters()) CHECK_FALSE(p->grad_populated());

  zero_grads<double>(all);
  backward(losses::spectral_loss(target, m.autoencode(target), cfg.spectral()));
  for (auto* p : m.encoder_parameters()) CHECK_MESSAGE(norm(p->grad()) > 0.0, p->name());
}

TEST_CASE("end-to-end gradient check on a reduced geometry") {
  const ModelConfig cfg = tiny_config();
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ModelConfig c = cfg;
    c.init_seed = seed;
    SingModel<double> m(c);
    jitter_biases(m, seed);
    Var<double> target(random_wave(c.signal_length, 100 + seed));
    const NoteLabel label{seed % 2, seed % 4, seed};
    auto params = m.parameters();
    auto generator = m.generator_parameters();
    auto decoder = m.decoder_parameters();
    ParameterList<double> deployed = generator;
    deployed.insert(deployed.end(), decoder.begin(), decoder.end());

    GradCheckOptions opts;
    opts.tol = 1e-3;
    opts.seed = seed;
    opts.max_coords = 12;
    const auto synth = grad_check_parameters(
        [&] { return losses::spectral_loss(target, m.synthesize(label), c.spectral()); }, deployed, opts);
    CHECK_MESSAGE(synth.passed, synth.summary());
    const auto ae = grad_check_parameters(
        [&] { return losses::spectral_loss(target, m.autoencode(target), c.spectral()); },
        m.encoder_parameters(), opts);
    CHECK_MESSAGE(ae.passed, ae.summary());
  }
}
