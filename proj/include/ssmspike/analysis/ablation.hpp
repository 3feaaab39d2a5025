#pragma once

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "ssmspike/train/evaluate.hpp"
#include "ssmspike/train/trainer.hpp"

namespace ssmspike::analysis {

/// Evaluation-time view of a network with some output channels silenced in
/// every hidden layer. The parameters are not touched.
struct DroppedView {
  nn::Network* net = nullptr;
  nn::ChannelDrop drop;

  train::EvalResult evaluate(const data::SequenceDataset& ds, train::EvalOptions opt = {}) const {
    opt.drop = drop;
    return train::evaluate(*net, ds, opt);
  }
};

inline DroppedView drop_channels(nn::Network& net, nn::ChannelDrop::Which which, int count) {
  if (count < 0 || count > net.config.n_out)
    throw ConfigError("drop_channels: count must be in [0, n_out=" + std::to_string(net.config.n_out) + "]");
  return {&net, {which, count}};
}

inline const char* to_string(nn::ChannelDrop::Which w) { return w == nn::ChannelDrop::Which::first ? "first" : "last"; }

/// Parses "first:k" or "last:k".
inline nn::ChannelDrop parse_channel_drop(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw ConfigError("channel drop must look like first:k or last:k");
  const std::string which = s.substr(0, colon), count = s.substr(colon + 1);
  nn::ChannelDrop d;
  if (which == "first") d.which = nn::ChannelDrop::Which::first;
  else if (which == "last") d.which = nn::ChannelDrop::Which::last;
  else throw ConfigError("channel drop side must be 'first' or 'last'");
  try {
    std::size_t used = 0;
    d.count = std::stoi(count, &used);
    if (used != count.size()) throw ConfigError("bad channel drop count '" + count + "'");
  } catch (const std::logic_error&) {
    throw ConfigError("bad channel drop count '" + count + "'");
  }
  if (d.count < 0) throw ConfigError("channel drop count must be >= 0");
  return d;
}

/// Accuracy when decoding from the readout accumulated over the first t
/// steps, for each t in `prefixes`.
inline std::vector<double> accuracy_over_time(nn::Network& net, const data::SequenceDataset& ds,
                                              const std::vector<std::size_t>& prefixes, train::EvalOptions opt = {}) {
  const std::size_t max_t = ds.max_steps();
  for (auto t : prefixes)
    if (t > max_t) throw ConfigError("accuracy_over_time: prefix " + std::to_string(t) + " exceeds the longest sequence");
  opt.prefix_steps = prefixes;
  return train::evaluate(net, ds, opt).prefix_accuracy;
}

inline constexpr const char* kAccuracyOverTimeHeader = "t,accuracy";
inline constexpr const char* kAblationHeader = "which,count,accuracy";

inline void write_accuracy_over_time_csv(std::ostream& os, const std::vector<std::size_t>& prefixes,
                                         const std::vector<double>& acc) {
  os << kAccuracyOverTimeHeader << '\n';
  for (std::size_t k = 0; k < prefixes.size(); ++k) os << prefixes[k] << ',' << train::format_double(acc[k]) << '\n';
}

struct AblationRow {
  nn::ChannelDrop::Which which;
  int count;
  double accuracy;
};

/// Both sides for every count in 0..n_out.
inline std::vector<AblationRow> ablation_table(nn::Network& net, const data::SequenceDataset& ds,
                                               const train::EvalOptions& opt = {}) {
  std::vector<AblationRow> rows;
  for (auto which : {nn::ChannelDrop::Which::first, nn::ChannelDrop::Which::last})
    for (int k = 0; k <= net.config.n_out; ++k)
      rows.push_back({which, k, drop_channels(net, which, k).evaluate(ds, opt).accuracy});
  return rows;
}

inline void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  os << kAblationHeader << '\n';
  for (const auto& r : rows) os << to_string(r.which) << ',' << r.count << ',' << train::format_double(r.accuracy) << '\n';
}

// ---------------------------------------------------------------------------

struct SweepShape {
  int h, n, n_out;
};

struct SweepCell {
  Regime regime;
  bool reset;
};

struct SweepRow {
  SweepShape shape;
  SweepCell cell;
  double test_acc = 0.0;
  std::string status = "ok";
};

inline bool satisfies_state_budget(const SweepShape& s, long total) { return static_cast<long>(s.h) * s.n == total; }
inline bool satisfies_output_budget(const SweepShape& s, long total) {
  return static_cast<long>(s.h) * s.n_out == total;
}

/// Trains and evaluates every (shape, cell) pair in grid order with shared
/// seeds. A failing cell is recorded in its status and the sweep continues.
/// `make_config` fills the remaining network fields for a cell.
inline std::vector<SweepRow> architecture_sweep(
    const std::vector<SweepShape>& shapes, const std::vector<SweepCell>& cells,
    const std::function<nn::NetworkConfig(const SweepShape&, const SweepCell&)>& make_config,
    const data::SequenceDataset& train_set, const data::SequenceDataset& test_set, const train::FitConfig& fit_cfg,
    std::uint64_t model_seed) {
  std::vector<SweepRow> rows;
  for (const auto& shape : shapes) {
    for (const auto& cell : cells) {
      SweepRow row{shape, cell, 0.0, "ok"};
      try {
        auto net = nn::build_network(make_config(shape, cell), model_seed);
        auto cfg = fit_cfg;
        cfg.output_dir.reset();
        const auto res = train::fit(net, train_set, test_set, cfg);
        row.test_acc = res.metrics.empty() ? train::evaluate(net, test_set).accuracy : res.metrics.back().test_acc;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline constexpr const char* kSweepHeader = "h,n,n_out,regime,reset,test_acc,status";

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << kSweepHeader << '\n';
  for (const auto& r : rows)
    os << r.shape.h << ',' << r.shape.n << ',' << r.shape.n_out << ',' << to_string(r.cell.regime) << ','
       << (r.cell.reset ? "reset" : "noreset") << ',' << train::format_double(r.test_acc) << ',' << csv_quote(r.status)
       << '\n';
}

}  // namespace ssmspike::analysis
