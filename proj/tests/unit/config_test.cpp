#include <gtest/gtest.h>

#include <yaml-cpp/yaml.h>

#include "ssmspike/config/run_config.hpp"

using namespace ssmspike;
using namespace ssmspike::config;

namespace {

RunConfig parse(const std::string& text) { return parse_run_config(YAML::Load(text)); }

}  // namespace

TEST(RunConfig, EmptyMappingGivesSyntheticDefaults) {
  const auto c = parse("{}");
  EXPECT_EQ(c.profile, "synthetic");
  EXPECT_EQ(c.dataset.kind, "synthetic");
  EXPECT_EQ(c.network.h, 32);
  EXPECT_EQ(c.training.epochs, 200);
}

TEST(RunConfig, OverridesOnTopOfProfile) {
  const auto c = parse(R"(
profile: synthetic
network:
  regime: unstable
  reset: false
  activation: signed
  h: 7
  rho_init: [0.25, -0.5]
  reset_norm: real
optimizer:
  lr: 0.003
training:
  epochs: 4
  seed: 9
)");
  EXPECT_EQ(c.network.regime, Regime::unstable);
  EXPECT_FALSE(c.network.reset_enabled);
  EXPECT_EQ(c.network.activation, Activation::signed_spike);
  EXPECT_EQ(c.network.h, 7);
  EXPECT_EQ(c.network.rho_init, Complex(0.25, -0.5));
  EXPECT_EQ(c.network.reset_norm, ResetNorm::real_projection);
  EXPECT_EQ(c.groups.other.lr, 0.003);
  EXPECT_EQ(c.groups.ssm.lr, 1e-2);
  EXPECT_EQ(c.training.epochs, 4);
  EXPECT_EQ(c.training.seed, 9u);
}

TEST(RunConfig, UnknownKeysAreRejected) {
  EXPECT_THROW(parse("bogus: 1"), ConfigError);
  EXPECT_THROW(parse("network: {hh: 3}"), ConfigError);
  EXPECT_THROW(parse("training: {epoch: 3}"), ConfigError);
}

TEST(RunConfig, InvalidValuesAreRejected) {
  EXPECT_THROW(parse("profile: imagenet"), ConfigError);
  EXPECT_THROW(parse("network: {regime: chaotic}"), ConfigError);
  EXPECT_THROW(parse("network: {activation: relu}"), ConfigError);
  EXPECT_THROW(parse("network: {h: 0}"), ConfigError);
  EXPECT_THROW(parse("network: {h: seven}"), ConfigError);
  EXPECT_THROW(parse("network: {rho_init: [1, 2, 3]}"), ConfigError);
  EXPECT_THROW(parse("dataset: {c_in: 3}"), ConfigError);
  EXPECT_THROW(parse("dataset: {validation_fraction: 1.0}"), ConfigError);
  EXPECT_THROW(parse("- a\n- b"), ConfigError);
}

TEST(ProfileDefaults, SequentialMnist) {
  const auto c = profile_defaults("smnist");
  EXPECT_EQ(c.network.c_in, 1);
  EXPECT_EQ(c.network.c_out, 10);
  EXPECT_EQ(c.network.h, 96);
  EXPECT_EQ(c.network.n, 8);
  EXPECT_EQ(c.network.n_out, 8);
  EXPECT_EQ(c.network.dropout, 0.3);
  EXPECT_EQ(c.groups.ssm.lr, 1e-4);
  EXPECT_EQ(c.groups.other.weight_decay, 1e-2);
  EXPECT_EQ(c.training.batch_size, 128u);
}

TEST(ProfileDefaults, SpeechCommandsDependOnRegimeAndReset) {
  EXPECT_EQ(profile_defaults("mswc", Regime::stable, false).groups.other.lr, 1e-2);
  EXPECT_EQ(profile_defaults("mswc", Regime::stable, true).groups.other.weight_decay, 1e-3);
  EXPECT_EQ(profile_defaults("mswc", Regime::unstable, true).groups.other.lr, 1e-3);
  EXPECT_EQ(profile_defaults("mswc", Regime::unstable, true).groups.other.weight_decay, 1e-4);
  EXPECT_EQ(profile_defaults("dvs").network.n_out, 24);
}

TEST(RunConfig, EmitRoundTrip) {
  for (const char* profile : {"synthetic", "smnist"}) {
    auto c = profile_defaults(profile, Regime::unstable, false);
    c.network.surrogate.half_width = 0.3;
    c.network.rho_init = {0.1 + 0.2, -1.0 / 3.0};
    c.dataset.validation_fraction = 0.1;
    const auto back = parse_run_config(YAML::Load(emit_run_config(c)));
    EXPECT_EQ(emit_run_config(back), emit_run_config(c));
    EXPECT_EQ(back.network.rho_init, c.network.rho_init);
    EXPECT_EQ(back.network.regime, Regime::unstable);
    EXPECT_FALSE(back.network.reset_enabled);
  }
}

TEST(LoadDatasets, SyntheticSplitAndValidation) {
  auto c = parse("dataset: {train_per_class: 10, test_per_class: 5, validation_fraction: 0.25}");
  const auto d = load_datasets(c);
  EXPECT_EQ(d.train.size(), 15u);
  EXPECT_EQ(d.eval.size(), 5u);
  EXPECT_EQ(d.test.size(), 10u);
}

TEST(LoadDatasets, MissingMnistDirectory) {
  auto c = parse("profile: smnist\ndataset: {path: /nonexistent/mnist}");
  EXPECT_THROW(load_datasets(c), DataError);
}
