// Command-line front end: train, eval, ablate, sweep, cost, gen-data.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ssmspike/ssmspike.hpp"

namespace fs = std::filesystem;
using namespace ssmspike;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kDivergence = 4 };

struct Common {
  std::string config;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string output;
};

config::RunConfig resolve(const Common& c) {
  auto rc = config::load_run_config(c.config);
  if (c.epochs) rc.training.epochs = *c.epochs;
  if (c.seed) rc.training.seed = *c.seed;
  if (c.threads) rc.training.threads = *c.threads;
  if (!c.output.empty()) rc.output_dir = c.output;
  rc.validate();
  return rc;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::trunc);
  if (!f) throw DataError("cannot write '" + p.string() + "'");
  f << s;
}

std::vector<std::size_t> parse_steps(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 0) throw ConfigError("");
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError("bad prefix step '" + item + "'");
    }
  }
  return out;
}

train::FitConfig fit_config(const config::RunConfig& rc) {
  train::FitConfig fc;
  fc.epochs = rc.training.epochs;
  fc.batch_size = rc.training.batch_size;
  fc.eval_batch_size = rc.training.eval_batch_size;
  fc.seed = rc.training.seed;
  fc.threads = rc.training.threads;
  fc.groups = rc.groups;
  fc.grad_clip = rc.training.grad_clip;
  fc.cosine = rc.training.cosine;
  return fc;
}

int cmd_train(const Common& c) {
  const auto rc = resolve(c);
  const auto data = config::load_datasets(rc);
  const fs::path out = rc.output_dir;
  fs::create_directories(out);
  write_text(out / "config.yaml", config::emit_run_config(rc));

  auto net = nn::build_network(rc.network, rc.training.seed);
  auto fc = fit_config(rc);
  fc.output_dir = out;
  fc.on_epoch = [](const train::EpochMetrics& m) {
    std::cout << "epoch " << m.epoch << "  loss " << m.train_loss << "  train_acc " << m.train_acc << "  test_acc "
              << m.test_acc << std::endl;
  };
  std::cout << "training " << net.trainable_count() << " parameters on " << data.train.size() << " samples ("
            << to_string(rc.network.regime) << ", reset " << (rc.network.reset_enabled ? "on" : "off") << ")\n";
  const auto res = train::fit(net, data.train, data.eval, fc);

  train::EvalOptions eo;
  eo.batch_size = rc.training.eval_batch_size;
  eo.threads = rc.training.threads;
  eo.spike_rates = rc.network.activation != Activation::gelu;
  const auto final_eval = train::evaluate(net, data.test, eo);
  if (eo.spike_rates) {
    std::ofstream f(out / "spike_rates.csv", std::ios::trunc);
    analysis::write_spike_rate_csv(f, final_eval.spike_rates);
  }
  nlohmann::json summary = {{"epochs", res.metrics.size()},
                            {"steps", res.steps},
                            {"best_epoch", res.best_epoch},
                            {"best_eval_acc", res.best_test_acc},
                            {"test_acc", final_eval.accuracy},
                            {"eigenvalue_violations", res.eigen_violations}};
  write_text(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "test_acc " << final_eval.accuracy << "\nwrote " << out.string() << "\n";
  return kOk;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& prefix, const std::string& drop) {
  const auto rc = resolve(c);
  const auto data = config::load_datasets(rc);
  auto ck = nn::load_checkpoint(checkpoint);
  if (ck.net.config.c_in != data.test.c_in || ck.net.config.c_out < data.test.c_out)
    throw ConfigError("checkpoint network does not match the dataset shape");
  train::EvalOptions eo;
  eo.batch_size = rc.training.eval_batch_size;
  eo.threads = rc.training.threads;
  if (!drop.empty()) {
    const auto d = analysis::parse_channel_drop(drop);
    eo.drop = analysis::drop_channels(ck.net, d.which, d.count).drop;
  }
  if (!prefix.empty()) {
    eo.prefix_steps = parse_steps(prefix);
    for (auto t : eo.prefix_steps)
      if (t > data.test.max_steps()) throw ConfigError("prefix step " + std::to_string(t) + " exceeds the sequence length");
  }
  const auto res = train::evaluate(ck.net, data.test, eo);
  std::cout << "accuracy " << train::format_double(res.accuracy) << "\n";
  if (!c.output.empty()) fs::create_directories(c.output);
  if (!eo.prefix_steps.empty()) {
    for (std::size_t k = 0; k < eo.prefix_steps.size(); ++k)
      std::cout << "t=" << eo.prefix_steps[k] << " accuracy " << train::format_double(res.prefix_accuracy[k]) << "\n";
    if (!c.output.empty()) {
      std::ofstream f(fs::path(c.output) / "accuracy_over_time.csv", std::ios::trunc);
      analysis::write_accuracy_over_time_csv(f, eo.prefix_steps, res.prefix_accuracy);
    }
  }
  if (!c.output.empty())
    write_text(fs::path(c.output) / "eval.csv", "accuracy\n" + train::format_double(res.accuracy) + "\n");
  return kOk;
}

int cmd_ablate(const Common& c, const std::string& checkpoint) {
  const auto rc = resolve(c);
  const auto data = config::load_datasets(rc);
  auto ck = nn::load_checkpoint(checkpoint);
  train::EvalOptions eo;
  eo.batch_size = rc.training.eval_batch_size;
  eo.threads = rc.training.threads;
  const auto rows = analysis::ablation_table(ck.net, data.test, eo);
  analysis::write_ablation_csv(std::cout, rows);
  if (!c.output.empty()) {
    fs::create_directories(c.output);
    std::ofstream f(fs::path(c.output) / "ablation.csv", std::ios::trunc);
    analysis::write_ablation_csv(f, rows);
  }
  return kOk;
}

std::vector<analysis::SweepShape> parse_shapes(const std::string& s) {
  std::vector<analysis::SweepShape> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    analysis::SweepShape sh{};
    char a = 0, b = 0;
    std::istringstream is(item);
    if (!(is >> sh.h >> a >> sh.n >> b >> sh.n_out) || a != ':' || b != ':' || !is.eof())
      throw ConfigError("sweep shape must look like h:n:n_out, got '" + item + "'");
    out.push_back(sh);
  }
  return out;
}

std::vector<analysis::SweepCell> parse_cells(const std::string& s) {
  std::vector<analysis::SweepCell> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) throw ConfigError("sweep cell must look like stable-reset, got '" + item + "'");
    const auto tail = item.substr(dash + 1);
    if (tail != "reset" && tail != "noreset") throw ConfigError("sweep cell suffix must be reset or noreset");
    out.push_back({parse_regime(item.substr(0, dash)), tail == "reset"});
  }
  return out;
}

int cmd_sweep(const Common& c, const std::string& shapes, const std::string& cells) {
  const auto rc = resolve(c);
  const auto data = config::load_datasets(rc);
  auto fc = fit_config(rc);
  const auto rows = analysis::architecture_sweep(
      parse_shapes(shapes), parse_cells(cells),
      [&](const analysis::SweepShape& s, const analysis::SweepCell& cell) {
        auto nc = rc.network;
        nc.h = s.h, nc.n = s.n, nc.n_out = s.n_out, nc.regime = cell.regime, nc.reset_enabled = cell.reset;
        return nc;
      },
      data.train, data.eval, fc, rc.training.seed);
  const fs::path out = rc.output_dir;
  fs::create_directories(out);
  write_text(out / "config.yaml", config::emit_run_config(rc));
  std::ofstream f(out / "sweep.csv", std::ios::trunc);
  analysis::write_sweep_csv(f, rows);
  analysis::write_sweep_csv(std::cout, rows);
  return kOk;
}

int cmd_cost(int n, int n_out, int h, const std::string& csv) {
  if (n < 1 || n_out < 1 || h < 1) throw ConfigError("--n, --nout and --h must be positive integers");
  const auto r = analysis::cost_report(n, n_out, h);
  std::cout << "params per neuron (p)      " << r.params_per_neuron << "\n"
            << "params per layer (p*h)     " << r.params_per_layer << "\n"
            << "reset condition MACs       " << r.reset.condition << "\n"
            << "reset action MACs          " << r.reset.action << "\n"
            << "reset MACs per neuron      " << r.reset.total << "\n"
            << "reset MACs per layer       " << r.reset_macs_per_layer << "\n"
            << "synaptic MACs per step     " << r.synaptic_macs_per_step << "\n";
  if (!csv.empty()) {
    std::ofstream f(csv, std::ios::trunc);
    if (!f) throw DataError("cannot write '" + csv + "'");
    analysis::write_cost_csv(f, r);
  }
  return kOk;
}

int cmd_gen_data(const data::SynthConfig& sc, const std::string& output) {
  sc.validate();
  auto ds = data::synth_pattern_task(sc);
  data::write_binned(output, ds, data::BinValueType::int8);
  std::cout << "wrote " << ds.size() << " samples (" << sc.num_classes << " classes, T=" << sc.steps
            << ", c_in=" << sc.c_in << ") to " << output << "\n";
  return kOk;
}

void add_common(CLI::App* app, Common& c, bool needs_config = true) {
  auto* opt = app->add_option("--config", c.config, "YAML run configuration");
  if (needs_config) opt->required()->check(CLI::ExistingFile);
  app->add_option("--epochs", c.epochs, "Override training.epochs")->check(CLI::NonNegativeNumber);
  app->add_option("--seed", c.seed, "Override training.seed");
  app->add_option("--threads", c.threads, "Worker threads (results do not depend on this)")->check(CLI::PositiveNumber);
  app->add_option("--output", c.output, "Output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-output spiking SSM networks: training and analysis"};
  app.require_subcommand(1);
  Common common;

  auto* train_cmd = app.add_subcommand("train", "Train a network from a config file");
  add_common(train_cmd, common);

  std::string checkpoint, prefix, drop;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the config's test set");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--prefix-steps", prefix, "Comma-separated prefix lengths for accuracy over time");
  eval_cmd->add_option("--drop-channels", drop, "Silence output channels: first:k or last:k");

  auto* ablate_cmd = app.add_subcommand("ablate", "Output-channel dropout table for a checkpoint");
  add_common(ablate_cmd, common);
  ablate_cmd->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);

  std::string shapes, cells = "stable-reset,stable-noreset,unstable-reset,unstable-noreset";
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate a grid of layer shapes");
  add_common(sweep_cmd, common);
  sweep_cmd->add_option("--shapes", shapes, "Comma-separated h:n:n_out triples")->required();
  sweep_cmd->add_option("--cells", cells, "Comma-separated regime-reset cells");

  int n = 0, n_out = 0, h = 0;
  std::string cost_csv;
  auto* cost_cmd = app.add_subcommand("cost", "Parameter and reset-MAC counts");
  cost_cmd->set_help_flag("--help", "Print this help message and exit");
  cost_cmd->add_option("--n", n, "State dimension")->required();
  cost_cmd->add_option("--nout", n_out, "Output channels per neuron")->required();
  cost_cmd->add_option("--h", h, "Neurons per layer")->required();
  cost_cmd->add_option("--csv", cost_csv, "Also write the report as CSV");

  data::SynthConfig sc;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic pattern dataset as a binned-spike file");
  gen_cmd->add_option("--classes", sc.num_classes, "Number of classes");
  gen_cmd->add_option("--steps", sc.steps, "Sequence length");
  gen_cmd->add_option("--c-in", sc.c_in, "Input channels");
  gen_cmd->add_option("--samples-per-class", sc.samples_per_class, "Samples per class");
  gen_cmd->add_option("--noise", sc.noise, "Bit-flip probability");
  gen_cmd->add_option("--seed", sc.seed, "Seed");
  gen_cmd->add_option("--output", gen_out, "Output file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) return cmd_train(common);
    if (*eval_cmd) return cmd_eval(common, checkpoint, prefix, drop);
    if (*ablate_cmd) return cmd_ablate(common, checkpoint);
    if (*sweep_cmd) return cmd_sweep(common, shapes, cells);
    if (*cost_cmd) return cmd_cost(n, n_out, h, cost_csv);
    if (*gen_cmd) return cmd_gen_data(sc, gen_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const train::DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kDivergence;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kDivergence;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
