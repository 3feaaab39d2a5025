#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "ssmspike/ssmspike.hpp"

using namespace ssmspike;
using namespace ssmspike::nn;

namespace {

NetworkConfig small_config() {
  NetworkConfig c;
  c.c_in = 3;
  c.c_out = 4;
  c.num_hidden_layers = 2;
  c.h = 5;
  c.n = 3;
  c.n_out = 2;
  return c;
}

Batch random_batch(int c_in, std::size_t steps, std::size_t size, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  Batch b;
  b.steps = steps;
  b.size = size;
  b.inputs.resize(static_cast<Eigen::Index>(steps * size), c_in);
  for (Eigen::Index k = 0; k < b.inputs.size(); ++k) b.inputs.data()[k] = u(rng);
  b.labels.assign(size, 0);
  b.lengths.assign(size, steps);
  return b;
}

}  // namespace

TEST(BuildNetwork, PublishedSmnistShapeCount) {
  NetworkConfig c;
  c.c_in = 1;
  c.c_out = 10;
  c.num_hidden_layers = 2;
  c.h = 96;
  c.n = 8;
  c.n_out = 8;
  auto net = build_network(c, 0);
  EXPECT_EQ(net.w_hidden.size(), 1u);
  EXPECT_EQ(net.w_hidden[0].value.rows(), 96);
  EXPECT_EQ(net.w_hidden[0].value.cols(), 96 * 8);
  EXPECT_EQ(net.trainable_count(), 113204u);
  EXPECT_NEAR(static_cast<double>(net.trainable_count()), 113000.0, 1000.0);
}

TEST(BuildNetwork, SingleLayerIsValid) {
  auto c = small_config();
  c.num_hidden_layers = 1;
  auto net = build_network(c, 1);
  EXPECT_TRUE(net.w_hidden.empty());
  EXPECT_EQ(net.layers.size(), 1u);
  auto r = forward(net, random_batch(3, 4, 2, 1));
  EXPECT_EQ(r.tape.value(r.logits).rows(), 8);
}

TEST(BuildNetwork, InvalidConfig) {
  auto c = small_config();
  c.h = 0;
  EXPECT_THROW(build_network(c, 0), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(build_network(c, 0), ConfigError);
}

TEST(BuildNetwork, SeedDeterminesWeights) {
  auto a = build_network(small_config(), 5), b = build_network(small_config(), 5), c = build_network(small_config(), 6);
  EXPECT_EQ(a.w_in.value, b.w_in.value);
  EXPECT_EQ(a.layers[1].lambda, b.layers[1].lambda);
  EXPECT_NE(a.w_in.value, c.w_in.value);
}

TEST(Parameters, GroupsAndFixedInputVector) {
  auto net = build_network(small_config(), 0);
  std::set<std::string> names;
  for (const auto& s : net.parameters()) {
    EXPECT_TRUE(names.insert(s.name).second) << "duplicate " << s.name;
    if (s.name.ends_with(".b")) {
      EXPECT_EQ(s.group, ParamGroup::fixed);
      EXPECT_TRUE(s.grad.empty());
    } else {
      EXPECT_NE(s.group, ParamGroup::fixed);
      EXPECT_EQ(s.grad.size(), s.value.size());
    }
    if (s.name.ends_with(".lambda")) EXPECT_EQ(s.group, ParamGroup::ssm);
    if (s.name.ends_with(".rho")) EXPECT_EQ(s.group, ParamGroup::rho);
    if (s.name.ends_with(".r_bias")) EXPECT_EQ(s.group, ParamGroup::r_bias);
  }
  EXPECT_TRUE(names.count("hidden2.rho"));

  auto c = small_config();
  c.reset_enabled = false;
  auto off = build_network(c, 0);
  for (const auto& s : off.parameters()) {
    EXPECT_NE(s.group, ParamGroup::rho);
    EXPECT_NE(s.group, ParamGroup::r_bias);
  }
}

TEST(Forward, AllZeroWeightsGiveZeroLogits) {
  auto net = build_network(small_config(), 2);
  net.w_in.value.setZero();
  for (auto& w : net.w_hidden) w.value.setZero();
  net.w_out.value.setZero();
  for (bool train : {false, true}) {
    ForwardOptions fo;
    fo.train = train;
    auto r = forward(net, random_batch(3, 6, 3, 2), fo);
    EXPECT_TRUE(r.tape.value(r.logits).isZero(0.0));
  }
}

TEST(Forward, SingleStepComposition) {
  auto c = small_config();
  c.num_hidden_layers = 1;
  auto net = build_network(c, 3);
  Rng rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto& cb : net.layers[0].c_bias) cb = {u(rng), u(rng)};
  const auto batch = random_batch(3, 1, 1, 9);
  auto r = forward(net, batch);

  const double bn_scale = 1.0 / std::sqrt(1.0 + net.bn[0].eps);
  Matrix cur = batch.inputs * net.w_in.value.transpose() * bn_scale;
  auto st = LayerState::zeros(net.layers[0].config);
  std::vector<double> in(cur.data(), cur.data() + cur.size());
  const auto rec = layer_step(net.layers[0], st, in);
  Matrix s(1, static_cast<Eigen::Index>(rec.spikes.size()));
  for (std::size_t k = 0; k < rec.spikes.size(); ++k) s(0, static_cast<Eigen::Index>(k)) = rec.spikes[k];
  const Matrix logits = s * net.w_out.value.transpose() / std::sqrt(1.0 + net.bn[1].eps);
  EXPECT_LT((r.tape.value(r.logits) - logits).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(r.tape.value(r.spikes[0]), s);
}

TEST(Forward, EvalModeIsDeterministic) {
  auto net = build_network(small_config(), 4);
  const auto batch = random_batch(3, 12, 4, 4);
  auto a = forward(net, batch), b = forward(net, batch);
  EXPECT_EQ(a.tape.value(a.logits), b.tape.value(b.logits));
}

TEST(Forward, ThreadCountDoesNotChangeResults) {
  auto c = small_config();
  c.regime = Regime::unstable;
  auto net1 = build_network(c, 5), net3 = build_network(c, 5);
  const auto batch = random_batch(3, 15, 3, 5);
  std::vector<int> labels = {0, 1, 3};
  auto run = [&](Network& net, int threads) {
    ForwardOptions fo;
    fo.train = true;
    fo.requires_grad = true;
    fo.threads = threads;
    auto r = forward(net, batch, fo);
    auto loss = train::cross_entropy(r.tape, r.accumulated, labels);
    r.tape.backward(loss);
    net.zero_grad();
    collect_gradients(net, r);
    return r.tape.value(r.logits);
  };
  EXPECT_EQ(run(net1, 1), run(net3, 3));
  EXPECT_EQ(net1.layer_grads[0].lambda, net3.layer_grads[0].lambda);
  EXPECT_EQ(net1.layer_grads[1].rho, net3.layer_grads[1].rho);
  EXPECT_EQ(net1.w_in.grad, net3.w_in.grad);
}

TEST(Forward, SpikeValuesInActivationCodomain) {
  for (auto act : {Activation::nonsigned, Activation::signed_spike}) {
    auto c = small_config();
    c.activation = act;
    auto net = build_network(c, 6);
    auto r = forward(net, random_batch(3, 20, 2, 6));
    for (auto v : r.spikes) {
      const Matrix& s = r.tape.value(v);
      EXPECT_EQ(s.cols(), c.h * c.n_out);
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        const double x = s.data()[k];
        if (act == Activation::nonsigned) EXPECT_TRUE(x == 0.0 || x == 1.0);
        else EXPECT_TRUE(x == 0.0 || x == 1.0 || x == -1.0);
      }
    }
  }
}

TEST(Forward, AllChannelsDroppedGivesConstantLogits) {
  auto net = build_network(small_config(), 7);
  ForwardOptions fo;
  fo.drop = ChannelDrop{ChannelDrop::Which::last, 2};
  auto a = forward(net, random_batch(3, 10, 2, 1), fo);
  auto b = forward(net, random_batch(3, 10, 2, 2), fo);
  const Matrix& la = a.tape.value(a.logits);
  EXPECT_EQ(la, b.tape.value(b.logits));
  for (Eigen::Index r = 1; r < la.rows(); ++r) EXPECT_EQ(la.row(r), la.row(0));
}

TEST(Forward, DroppedChannelOnlyAffectsItsColumns) {
  auto net = build_network(small_config(), 8);
  const auto batch = random_batch(3, 10, 2, 3);
  auto full = forward(net, batch);
  ForwardOptions fo;
  fo.drop = ChannelDrop{ChannelDrop::Which::first, 1};
  auto dropped = forward(net, batch, fo);
  // First hidden layer: only channel 0 of each neuron changes (to zero).
  const Matrix& s_full = full.tape.value(full.spikes[0]);
  const Matrix& s_drop = dropped.tape.value(dropped.spikes[0]);
  for (Eigen::Index col = 0; col < s_full.cols(); ++col) {
    if (col % 2 == 0) EXPECT_TRUE(s_drop.col(col).isZero(0.0));
    else EXPECT_EQ(s_drop.col(col), s_full.col(col));
  }
}

TEST(Forward, InputErrors) {
  auto net = build_network(small_config(), 0);
  auto b = random_batch(3, 4, 2, 0);
  b.inputs(0, 0) = std::nan("");
  EXPECT_THROW(forward(net, b), NumericError);
  EXPECT_THROW(forward(net, random_batch(2, 4, 2, 0)), ConfigError);
}

TEST(Forward, DropoutNeedsRngInTrainMode) {
  auto c = small_config();
  c.dropout = 0.3;
  auto net = build_network(c, 0);
  ForwardOptions fo;
  fo.train = true;
  EXPECT_THROW(forward(net, random_batch(3, 4, 2, 0), fo), ConfigError);
  Rng rng(1);
  fo.dropout_rng = &rng;
  EXPECT_NO_THROW(forward(net, random_batch(3, 4, 2, 0), fo));
}

TEST(RateDecode, Examples) {
  Matrix one_hot = Matrix::Zero(3, 4);
  one_hot(0, 2) = 1.0;
  one_hot(1, 2) = 1.0;
  one_hot(2, 2) = 1.0;
  EXPECT_EQ(rate_decode(one_hot, 3, 1), std::vector<int>{2});

  EXPECT_EQ(rate_decode(Matrix::Constant(2, 5, 0.7)), (std::vector<int>{0, 0}));

  Matrix acc(1, 3);
  acc << 1.0, 3.0, 2.0;
  EXPECT_EQ(rate_decode(acc), std::vector<int>{1});

  Matrix tie(1, 3);
  tie << 1.0, 4.0, 4.0;
  EXPECT_EQ(rate_decode(tie), std::vector<int>{1});
  EXPECT_THROW(rate_decode(acc, 0, 1), ConfigError);
}

TEST(TimeSum, RespectsLengthsAndIsOrderFree) {
  Tape t;
  Matrix x(6, 2);  // steps 3, batch 2
  x << 1, 2, 10, 20, 3, 4, 30, 40, 5, 6, 50, 60;
  const std::size_t len[2] = {3, 1};
  auto v = t.parameter(x);
  auto s = time_sum(t, v, 3, 2, len);
  EXPECT_EQ(t.value(s)(0, 0), 9.0);
  EXPECT_EQ(t.value(s)(1, 1), 20.0);
  Matrix swapped = x;
  swapped.row(0).swap(swapped.row(4));
  Tape t2;
  auto s2 = time_sum(t2, t2.constant(swapped), 3, 2, len);
  EXPECT_EQ(t2.value(s2).row(0), t.value(s).row(0));
  t.backward(ops::sum(t, s));
  EXPECT_EQ(t.grad(v)(4, 0), 1.0);
  EXPECT_EQ(t.grad(v)(5, 0), 0.0);
}

TEST(BatchNorm, ConstantChannelTrainModeGivesShift) {
  Tape t;
  Matrix x(4, 2);
  x << 3, 1, 3, 2, 3, 3, 3, 4;
  auto st = BatchNormState::identity(2);
  Matrix beta(1, 2);
  beta << 0.25, -1.0;
  auto out = batch_norm(t, t.constant(x), t.parameter(Matrix::Constant(1, 2, 2.0)), t.parameter(beta), st, true);
  for (Eigen::Index r = 0; r < 4; ++r) EXPECT_DOUBLE_EQ(t.value(out)(r, 0), 0.25);
}

TEST(BatchNorm, EvalIdentityStatsPassThrough) {
  Tape t;
  Matrix x(3, 2);
  x << 1, -2, 0.5, 7, 3, 3;
  auto st = BatchNormState::identity(2);
  st.eps = 0.0;
  auto out = batch_norm(t, t.constant(x), t.parameter(Matrix::Ones(1, 2)), t.parameter(Matrix::Zero(1, 2)), st, false);
  EXPECT_EQ(t.value(out), x);
}

TEST(BatchNorm, TrainModeNormalizesPerChannel) {
  Rng rng(1);
  std::normal_distribution<double> g(3.0, 2.0);
  Matrix x(50, 3);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = g(rng);
  Tape t;
  auto st = BatchNormState::identity(3);
  st.eps = 0.0;
  auto out = batch_norm(t, t.constant(x), t.parameter(Matrix::Ones(1, 3)), t.parameter(Matrix::Zero(1, 3)), st, true);
  const Matrix& y = t.value(out);
  for (Eigen::Index c = 0; c < 3; ++c) {
    const double mean = y.col(c).mean();
    const double var = (y.col(c).array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(var, 1.0, 1e-6);
  }
  EXPECT_GT(st.running_mean(0), 0.1);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences) {
  Rng rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(6, 2), w(6, 2);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = u(rng), w.data()[k] = u(rng);
  Matrix gamma(1, 2), beta(1, 2);
  gamma << 1.5, 0.7;
  beta << 0.1, -0.2;
  auto loss = [&](Tape& t, Tape::Var xv, Tape::Var gv) {
    auto st = BatchNormState::identity(2);
    auto out = batch_norm(t, xv, gv, t.parameter(beta), st, true);
    return ops::sum(t, ops::mul(t, ops::square(t, out), t.constant(w)));
  };
  Tape t;
  auto xv = t.parameter(x);
  auto gv = t.parameter(gamma);
  t.backward(loss(t, xv, gv));
  const Matrix gx = t.grad(xv);
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Matrix xp = x, xm = x;
    xp.data()[k] += 1e-6;
    xm.data()[k] -= 1e-6;
    Tape a(false), b(false);
    const double fp = a.value(loss(a, a.parameter(xp), a.parameter(gamma)))(0, 0);
    const double fm = b.value(loss(b, b.parameter(xm), b.parameter(gamma)))(0, 0);
    EXPECT_NEAR(gx.data()[k], (fp - fm) / 2e-6, 1e-6);
  }
}

TEST(Checkpoint, RoundTripReproducesEvaluation) {
  auto net = build_network(small_config(), 11);
  const auto batch = random_batch(3, 8, 3, 11);
  ForwardOptions fo;
  fo.train = true;
  forward(net, batch, fo);  // move running statistics away from identity
  const auto path = std::filesystem::temp_directory_path() / "ssmspike_ckpt_test.json";
  save_checkpoint(path, net, "state", {{"epoch", 3}});
  auto ck = load_checkpoint(path);
  EXPECT_EQ(ck.rng_state.value(), "state");
  EXPECT_EQ(ck.extra.at("epoch"), 3);
  auto a = forward(net, batch), b = forward(ck.net, batch);
  EXPECT_EQ(a.tape.value(a.logits), b.tape.value(b.logits));
  std::filesystem::remove(path);
}

TEST(Checkpoint, MismatchesAreDataErrors) {
  auto net = build_network(small_config(), 12);
  auto j = checkpoint_json(net);
  auto bad = j;
  bad["tensors"]["w_in"].erase(0);
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["config"]["h"] = 6;
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["format"] = "other";
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  bad = j;
  bad["config"]["n"] = 0;
  EXPECT_THROW(checkpoint_from_json(bad), DataError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), DataError);
}

TEST(Checkpoint, RngStateRoundTrip) {
  Rng rng(99);
  rng.discard(17);
  auto copy = rng_from_state(rng_state_string(rng));
  EXPECT_EQ(copy(), rng());
  EXPECT_THROW(rng_from_state("garbage"), DataError);
}
