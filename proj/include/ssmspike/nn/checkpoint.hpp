#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ssmspike/nn/network.hpp"

// JSON checkpoints. Doubles are written in shortest round-trip form, so a
// save/load cycle reproduces every parameter bit for bit.
namespace ssmspike::nn {

using json = nlohmann::json;

inline constexpr int kCheckpointVersion = 1;

inline json to_json(const NetworkConfig& c) {
  return {{"c_in", c.c_in},
          {"c_out", c.c_out},
          {"num_hidden_layers", c.num_hidden_layers},
          {"h", c.h},
          {"n", c.n},
          {"n_out", c.n_out},
          {"activation", to_string(c.activation)},
          {"regime", to_string(c.regime)},
          {"reset_enabled", c.reset_enabled},
          {"dropout", c.dropout},
          {"batch_norm", c.batch_norm},
          {"shared_reset_params", c.shared_reset_params},
          {"reset_norm", c.reset_norm == ResetNorm::complex_output ? "complex" : "real"},
          {"surrogate_half_width", c.surrogate.half_width},
          {"state_clip", c.state_clip},
          {"delta_min", c.delta_min},
          {"delta_max", c.delta_max},
          {"rho_init", {c.rho_init.real(), c.rho_init.imag()}},
          {"r_bias_init", c.r_bias_init}};
}

inline NetworkConfig network_config_from_json(const json& j) {
  NetworkConfig c;
  c.c_in = j.at("c_in").get<int>();
  c.c_out = j.at("c_out").get<int>();
  c.num_hidden_layers = j.at("num_hidden_layers").get<int>();
  c.h = j.at("h").get<int>();
  c.n = j.at("n").get<int>();
  c.n_out = j.at("n_out").get<int>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.regime = parse_regime(j.at("regime").get<std::string>());
  c.reset_enabled = j.at("reset_enabled").get<bool>();
  c.dropout = j.at("dropout").get<double>();
  c.batch_norm = j.at("batch_norm").get<bool>();
  c.shared_reset_params = j.at("shared_reset_params").get<bool>();
  c.reset_norm = j.at("reset_norm").get<std::string>() == "real" ? ResetNorm::real_projection : ResetNorm::complex_output;
  c.surrogate.half_width = j.at("surrogate_half_width").get<double>();
  c.state_clip = j.at("state_clip").get<double>();
  c.delta_min = j.at("delta_min").get<double>();
  c.delta_max = j.at("delta_max").get<double>();
  c.rho_init = {j.at("rho_init").at(0).get<double>(), j.at("rho_init").at(1).get<double>()};
  c.r_bias_init = j.at("r_bias_init").get<double>();
  c.validate();
  return c;
}

struct Checkpoint {
  Network net;
  std::optional<std::string> rng_state;
  json extra;  // training state or metadata, opaque to this module
};

inline json checkpoint_json(Network& net, const std::optional<std::string>& rng_state = std::nullopt,
                            const json& extra = json::object()) {
  json j;
  j["format"] = "ssmspike-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(net.config);
  json tensors = json::object();
  for (const auto& s : net.parameters()) tensors[s.name] = std::vector<double>(s.value.begin(), s.value.end());
  j["tensors"] = std::move(tensors);
  json bn = json::array();
  for (const auto& st : net.bn) {
    bn.push_back({{"running_mean", std::vector<double>(st.running_mean.data(), st.running_mean.data() + st.running_mean.size())},
                  {"running_var", std::vector<double>(st.running_var.data(), st.running_var.data() + st.running_var.size())},
                  {"momentum", st.momentum},
                  {"eps", st.eps}});
  }
  j["batch_norm"] = std::move(bn);
  if (rng_state) j["rng"] = *rng_state;
  j["extra"] = extra;
  return j;
}

/// Rebuilds a network from checkpoint JSON; every stored tensor must match
/// the shape implied by the stored config.
inline Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (j.at("format") != "ssmspike-checkpoint") throw DataError("not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointVersion) throw DataError("unsupported checkpoint version");
    Checkpoint ck{build_network(network_config_from_json(j.at("config")), 0), std::nullopt, json::object()};
    const auto& tensors = j.at("tensors");
    for (auto& s : ck.net.parameters()) {
      if (!tensors.contains(s.name)) throw DataError("checkpoint is missing tensor '" + s.name + "'");
      const auto& arr = tensors.at(s.name);
      if (arr.size() != s.value.size()) throw DataError("checkpoint tensor '" + s.name + "' does not match the config shape");
      for (std::size_t k = 0; k < s.value.size(); ++k) s.value[k] = arr[k].get<double>();
    }
    const auto& bn = j.at("batch_norm");
    if (bn.size() != ck.net.bn.size()) throw DataError("checkpoint batch-norm count does not match the config");
    for (std::size_t k = 0; k < bn.size(); ++k) {
      auto& st = ck.net.bn[k];
      const auto mean = bn[k].at("running_mean").get<std::vector<double>>();
      const auto var = bn[k].at("running_var").get<std::vector<double>>();
      if (mean.size() != static_cast<std::size_t>(st.running_mean.size()) || var.size() != mean.size())
        throw DataError("checkpoint batch-norm statistics do not match the config");
      std::copy(mean.begin(), mean.end(), st.running_mean.data());
      std::copy(var.begin(), var.end(), st.running_var.data());
      st.momentum = bn[k].at("momentum").get<double>();
      st.eps = bn[k].at("eps").get<double>();
    }
    if (j.contains("rng")) ck.rng_state = j.at("rng").get<std::string>();
    if (j.contains("extra")) ck.extra = j.at("extra");
    return ck;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint config is invalid: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, Network& net,
                            const std::optional<std::string>& rng_state = std::nullopt,
                            const json& extra = json::object()) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint '" + path.string() + "'");
  f << checkpoint_json(net, rng_state, extra).dump() << '\n';
  if (!f) throw DataError("error writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DataError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

inline std::string rng_state_string(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_state(const std::string& s) {
  Rng rng;
  std::istringstream is(s);
  is >> rng;
  if (!is) throw DataError("malformed RNG state");
  return rng;
}

}  // namespace ssmspike::nn
