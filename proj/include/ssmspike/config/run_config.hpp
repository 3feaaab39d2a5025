#pragma once

#include <filesystem>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "ssmspike/data/binned.hpp"
#include "ssmspike/data/idx.hpp"
#include "ssmspike/data/synthetic.hpp"
#include "ssmspike/nn/network.hpp"
#include "ssmspike/train/optim.hpp"

// YAML run configuration. A `profile` key selects built-in defaults for a
// dataset; every other key overrides them.
namespace ssmspike::config {

struct DatasetSpec {
  std::string kind = "synthetic";  // synthetic | smnist | binned
  std::uint64_t seed = 0;
  // synthetic
  int classes = 2;
  int steps = 50;
  int c_in = 8;
  int train_per_class = 100;
  int test_per_class = 50;
  double noise = 0.05;
  // smnist: directory with the four IDX files (optionally gzipped)
  std::string path;
  // binned
  std::string train_path, test_path;
  int bin = 1;
  // all kinds
  std::size_t train_limit = 0;  // 0 = everything
  std::size_t test_limit = 0;
  double validation_fraction = 0.0;
};

struct TrainingSpec {
  int epochs = 1;
  std::size_t batch_size = 32;
  std::size_t eval_batch_size = 256;
  std::uint64_t seed = 0;
  int threads = 1;
  double grad_clip = 1e5;
  bool cosine = true;
};

struct RunConfig {
  std::string profile = "synthetic";
  DatasetSpec dataset;
  nn::NetworkConfig network;
  train::ParamGroups groups;
  TrainingSpec training;
  std::string output_dir = "runs/default";

  void validate() const {
    network.validate();
    groups.validate();
    if (training.epochs < 0) throw ConfigError("training.epochs must be >= 0");
    if (training.batch_size < 1 || training.eval_batch_size < 1) throw ConfigError("batch sizes must be >= 1");
    if (training.threads < 1) throw ConfigError("training.threads must be >= 1");
    if (!(dataset.validation_fraction >= 0.0 && dataset.validation_fraction < 1.0))
      throw ConfigError("dataset.validation_fraction must be in [0, 1)");
    if (dataset.bin < 1) throw ConfigError("dataset.bin must be >= 1");
    if (dataset.kind == "synthetic") {
      data::SynthConfig{dataset.classes, dataset.steps, dataset.c_in, 1, dataset.noise, dataset.seed}.validate();
      if (dataset.train_per_class < 1 || dataset.test_per_class < 1)
        throw ConfigError("dataset.train_per_class and dataset.test_per_class must be >= 1");
      if (dataset.c_in != network.c_in || dataset.classes > network.c_out)
        throw ConfigError("synthetic dataset shape does not match network.c_in / network.c_out");
    } else if (dataset.kind == "smnist") {
      if (dataset.path.empty()) throw ConfigError("dataset.path is required for smnist");
      if (network.c_in != 1 || network.c_out < 10) throw ConfigError("smnist needs network.c_in = 1 and c_out >= 10");
    } else if (dataset.kind == "binned") {
      if (dataset.train_path.empty() || dataset.test_path.empty())
        throw ConfigError("dataset.train_path and dataset.test_path are required for binned data");
    } else {
      throw ConfigError("unknown dataset.kind '" + dataset.kind + "' (expected synthetic, smnist or binned)");
    }
  }
};

inline void set_groups(train::ParamGroups& g, double lr, double lr_ssm, double lr_rho, double lr_rb, double wd,
                       double wd_ssm, double wd_rho, double wd_rb) {
  g.other = {lr, wd};
  g.ssm = {lr_ssm, wd_ssm};
  g.rho = {lr_rho, wd_rho};
  g.r_bias = {lr_rb, wd_rb};
}

/// Built-in defaults. The mswc optimizer settings depend on the regime and
/// the reset flag, so those two are inputs.
inline RunConfig profile_defaults(const std::string& name, Regime regime = Regime::stable, bool reset = true) {
  RunConfig c;
  c.profile = name;
  auto& n = c.network;
  n.regime = regime;
  n.reset_enabled = reset;
  if (name == "smnist") {
    n.c_in = 1, n.c_out = 10, n.num_hidden_layers = 2, n.h = 96, n.n = 8, n.n_out = 8;
    n.dropout = 0.3, n.rho_init = {0.5, 0.0}, n.r_bias_init = 0.0;
    set_groups(c.groups, 1e-3, 1e-4, 1e-5, 1e-5, 1e-2, 1e-3, 0.0, 0.0);
    c.training.epochs = 50, c.training.batch_size = 128;
    c.dataset.kind = "smnist";
    c.dataset.path = "data/mnist";
  } else if (name == "dvs") {
    n.c_in = 32768, n.c_out = 11, n.num_hidden_layers = 3, n.h = 128, n.n = 8, n.n_out = 24;
    n.dropout = 0.0, n.rho_init = {0.8, 0.0}, n.r_bias_init = 0.0;
    set_groups(c.groups, 1e-4, 1e-2, 1e-4, 1e-6, 0.0, 1e-2, 1e-2, 1e-5);
    c.training.epochs = 50, c.training.batch_size = 16;
    c.dataset.kind = "binned";
  } else if (name == "mswc") {
    n.c_in = 20, n.c_out = 100, n.num_hidden_layers = 2, n.h = 256, n.n = 8, n.n_out = 4;
    n.dropout = 0.4, n.rho_init = {0.1, 0.0}, n.r_bias_init = 0.0;
    double lr = 1e-3, wd = 1e-4;
    if (regime == Regime::stable && reset) wd = 1e-3;
    if (regime == Regime::stable && !reset) lr = 1e-2;
    set_groups(c.groups, lr, lr, lr, lr, wd, 1e-3, wd, wd);
    c.training.epochs = 100, c.training.batch_size = 256;
    c.dataset.kind = "binned";
  } else if (name == "synthetic") {
    n.c_in = 8, n.c_out = 2, n.num_hidden_layers = 2, n.h = 32, n.n = 4, n.n_out = 4;
    n.dropout = 0.0, n.rho_init = {0.5, 0.0};
    set_groups(c.groups, 1e-2, 1e-2, 1e-2, 1e-2, 0.0, 0.0, 0.0, 0.0);
    c.training.epochs = 200, c.training.batch_size = 32;
    c.dataset.kind = "synthetic";
  } else {
    throw ConfigError("unknown profile '" + name + "' (expected smnist, synthetic, mswc or dvs)");
  }
  return c;
}

namespace detail {

class Section {
 public:
  Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ && !node_.IsMap()) throw ConfigError("'" + path_ + "' must be a mapping");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const YAML::Node& n = node_;
    if (!n || !n[key]) return;
    try {
      out = n[key].as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("bad value for '" + path_ + key + "'");
    }
  }

  bool has(const char* key) const { return node_ && std::as_const(node_)[key]; }
  void touch(const char* key) { seen_.insert(key); }

  /// Rejects keys that were never requested.
  void finish() const {
    if (!node_) return;
    for (const auto& kv : node_) {
      const auto k = kv.first.as<std::string>();
      if (!seen_.count(k)) throw ConfigError("unknown config key '" + path_ + k + "'");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig parse_run_config(const YAML::Node& root) {
  if (!root.IsMap()) throw ConfigError("config root must be a mapping");
  detail::Section top(root, "");
  std::string profile = "synthetic";
  top.get("profile", profile);
  const YAML::Node net_node = root["network"];
  std::string regime = "stable";
  bool reset = true;
  try {
    if (net_node && net_node.IsMap()) {
      if (net_node["regime"]) regime = net_node["regime"].as<std::string>();
      if (net_node["reset"]) reset = net_node["reset"].as<bool>();
    }
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for network.regime or network.reset");
  }
  RunConfig c = profile_defaults(profile, parse_regime(regime), reset);
  top.get("output_dir", c.output_dir);
  for (const char* k : {"dataset", "network", "optimizer", "training"}) top.touch(k);
  top.finish();

  detail::Section d(root["dataset"], "dataset.");
  auto& dsr = c.dataset;
  d.get("kind", dsr.kind);
  d.get("seed", dsr.seed);
  d.get("classes", dsr.classes);
  d.get("steps", dsr.steps);
  d.get("c_in", dsr.c_in);
  d.get("train_per_class", dsr.train_per_class);
  d.get("test_per_class", dsr.test_per_class);
  d.get("noise", dsr.noise);
  d.get("path", dsr.path);
  d.get("train_path", dsr.train_path);
  d.get("test_path", dsr.test_path);
  d.get("bin", dsr.bin);
  d.get("train_limit", dsr.train_limit);
  d.get("test_limit", dsr.test_limit);
  d.get("validation_fraction", dsr.validation_fraction);
  d.finish();

  detail::Section n(net_node, "network.");
  auto& nc = c.network;
  std::string activation = to_string(nc.activation), norm = "complex";
  std::vector<double> rho{nc.rho_init.real(), nc.rho_init.imag()};
  n.get("c_in", nc.c_in);
  n.get("c_out", nc.c_out);
  n.get("layers", nc.num_hidden_layers);
  n.get("h", nc.h);
  n.get("n", nc.n);
  n.get("n_out", nc.n_out);
  n.get("activation", activation);
  n.get("regime", regime);
  n.get("reset", nc.reset_enabled);
  n.get("dropout", nc.dropout);
  n.get("batch_norm", nc.batch_norm);
  n.get("shared_reset_params", nc.shared_reset_params);
  n.get("reset_norm", norm);
  n.get("surrogate_half_width", nc.surrogate.half_width);
  n.get("state_clip", nc.state_clip);
  n.get("delta_min", nc.delta_min);
  n.get("delta_max", nc.delta_max);
  n.get("rho_init", rho);
  n.get("r_bias_init", nc.r_bias_init);
  n.finish();
  nc.activation = parse_activation(activation);
  nc.regime = parse_regime(regime);
  if (norm != "complex" && norm != "real") throw ConfigError("network.reset_norm must be 'complex' or 'real'");
  nc.reset_norm = norm == "real" ? ResetNorm::real_projection : ResetNorm::complex_output;
  if (rho.size() != 2) throw ConfigError("network.rho_init must be [re, im]");
  nc.rho_init = {rho[0], rho[1]};

  detail::Section o(root["optimizer"], "optimizer.");
  auto& g = c.groups;
  o.get("lr", g.other.lr);
  o.get("wd", g.other.weight_decay);
  o.get("lr_ssm", g.ssm.lr);
  o.get("wd_ssm", g.ssm.weight_decay);
  o.get("lr_rho", g.rho.lr);
  o.get("wd_rho", g.rho.weight_decay);
  o.get("lr_r_bias", g.r_bias.lr);
  o.get("wd_r_bias", g.r_bias.weight_decay);
  o.finish();

  detail::Section t(root["training"], "training.");
  auto& tr = c.training;
  t.get("epochs", tr.epochs);
  t.get("batch_size", tr.batch_size);
  t.get("eval_batch_size", tr.eval_batch_size);
  t.get("seed", tr.seed);
  t.get("threads", tr.threads);
  t.get("grad_clip", tr.grad_clip);
  t.get("cosine", tr.cosine);
  t.finish();

  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot read config '" + path.string() + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid YAML: " + e.what());
  }
  return parse_run_config(root);
}

/// Fully resolved configuration in the same layout `parse_run_config` reads.
inline std::string emit_run_config(const RunConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "profile" << YAML::Value << c.profile;
  e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  const auto& d = c.dataset;
  e << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << d.kind << YAML::Key << "seed" << YAML::Value << d.seed;
  e << YAML::Key << "classes" << YAML::Value << d.classes << YAML::Key << "steps" << YAML::Value << d.steps;
  e << YAML::Key << "c_in" << YAML::Value << d.c_in;
  e << YAML::Key << "train_per_class" << YAML::Value << d.train_per_class;
  e << YAML::Key << "test_per_class" << YAML::Value << d.test_per_class;
  e << YAML::Key << "noise" << YAML::Value << d.noise << YAML::Key << "path" << YAML::Value << d.path;
  e << YAML::Key << "train_path" << YAML::Value << d.train_path;
  e << YAML::Key << "test_path" << YAML::Value << d.test_path << YAML::Key << "bin" << YAML::Value << d.bin;
  e << YAML::Key << "train_limit" << YAML::Value << d.train_limit;
  e << YAML::Key << "test_limit" << YAML::Value << d.test_limit;
  e << YAML::Key << "validation_fraction" << YAML::Value << d.validation_fraction;
  e << YAML::EndMap;
  const auto& n = c.network;
  e << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "c_in" << YAML::Value << n.c_in << YAML::Key << "c_out" << YAML::Value << n.c_out;
  e << YAML::Key << "layers" << YAML::Value << n.num_hidden_layers;
  e << YAML::Key << "h" << YAML::Value << n.h << YAML::Key << "n" << YAML::Value << n.n;
  e << YAML::Key << "n_out" << YAML::Value << n.n_out;
  e << YAML::Key << "activation" << YAML::Value << to_string(n.activation);
  e << YAML::Key << "regime" << YAML::Value << to_string(n.regime);
  e << YAML::Key << "reset" << YAML::Value << n.reset_enabled;
  e << YAML::Key << "dropout" << YAML::Value << n.dropout;
  e << YAML::Key << "batch_norm" << YAML::Value << n.batch_norm;
  e << YAML::Key << "shared_reset_params" << YAML::Value << n.shared_reset_params;
  e << YAML::Key << "reset_norm" << YAML::Value << (n.reset_norm == ResetNorm::real_projection ? "real" : "complex");
  e << YAML::Key << "surrogate_half_width" << YAML::Value << n.surrogate.half_width;
  e << YAML::Key << "state_clip" << YAML::Value << n.state_clip;
  e << YAML::Key << "delta_min" << YAML::Value << n.delta_min << YAML::Key << "delta_max" << YAML::Value << n.delta_max;
  e << YAML::Key << "rho_init" << YAML::Value << YAML::Flow << YAML::BeginSeq << n.rho_init.real() << n.rho_init.imag()
    << YAML::EndSeq;
  e << YAML::Key << "r_bias_init" << YAML::Value << n.r_bias_init;
  e << YAML::EndMap;
  const auto& g = c.groups;
  e << YAML::Key << "optimizer" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "lr" << YAML::Value << g.other.lr << YAML::Key << "wd" << YAML::Value << g.other.weight_decay;
  e << YAML::Key << "lr_ssm" << YAML::Value << g.ssm.lr << YAML::Key << "wd_ssm" << YAML::Value << g.ssm.weight_decay;
  e << YAML::Key << "lr_rho" << YAML::Value << g.rho.lr << YAML::Key << "wd_rho" << YAML::Value << g.rho.weight_decay;
  e << YAML::Key << "lr_r_bias" << YAML::Value << g.r_bias.lr;
  e << YAML::Key << "wd_r_bias" << YAML::Value << g.r_bias.weight_decay;
  e << YAML::EndMap;
  const auto& t = c.training;
  e << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "epochs" << YAML::Value << t.epochs << YAML::Key << "batch_size" << YAML::Value << t.batch_size;
  e << YAML::Key << "eval_batch_size" << YAML::Value << t.eval_batch_size;
  e << YAML::Key << "seed" << YAML::Value << t.seed << YAML::Key << "threads" << YAML::Value << t.threads;
  e << YAML::Key << "grad_clip" << YAML::Value << t.grad_clip << YAML::Key << "cosine" << YAML::Value << t.cosine;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

struct LoadedData {
  data::SequenceDataset train;
  data::SequenceDataset eval;  // per-epoch evaluation set
  data::SequenceDataset test;
};

/// Materializes the datasets a run config names.
inline LoadedData load_datasets(const RunConfig& c) {
  const auto& d = c.dataset;
  data::SequenceDataset train, test;
  if (d.kind == "synthetic") {
    data::SynthConfig sc{d.classes, d.steps, d.c_in, d.train_per_class + d.test_per_class, d.noise, d.seed};
    auto all = data::synth_pattern_task(sc);
    const auto n_train = static_cast<std::size_t>(d.train_per_class) * static_cast<std::size_t>(d.classes);
    std::vector<std::size_t> a(n_train), b(all.size() - n_train);
    std::iota(a.begin(), a.end(), std::size_t{0});
    std::iota(b.begin(), b.end(), n_train);
    train = data::subset(all, a);
    test = data::subset(all, b);
  } else if (d.kind == "smnist") {
    std::tie(train, test) = data::load_smnist(data::SmnistPaths::in_directory(d.path));
  } else {
    train = data::load_binned_spikes(d.train_path);
    test = data::load_binned_spikes(d.test_path);
  }
  if (d.bin > 1) {
    train = data::sum_bin(train, d.bin);
    test = data::sum_bin(test, d.bin);
  }
  if (d.train_limit > 0) train = data::take(train, d.train_limit);
  if (d.test_limit > 0) test = data::take(test, d.test_limit);
  train.validate();
  test.validate();
  if (train.c_in != c.network.c_in) throw ConfigError("dataset c_in does not match network.c_in");
  if (train.c_out > c.network.c_out) throw ConfigError("dataset has more classes than network.c_out");
  LoadedData out;
  if (d.validation_fraction > 0.0) {
    auto [tr, va] = data::validation_split(train, d.validation_fraction, d.seed);
    out.train = std::move(tr);
    out.eval = std::move(va);
  } else {
    out.train = std::move(train);
    out.eval = test;
  }
  out.test = std::move(test);
  return out;
}

}  // namespace ssmspike::config
