#pragma once

// Self-describing JSON checkpoint with base64 little-endian float64 tensors.

#include "xferlos/dataprep/pipeline.hpp"
#include "xferlos/io/base64.hpp"
#include "xferlos/training/adam.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>

namespace xferlos {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  LstmModel model;
  std::optional<AdamState> optimizer;
  std::optional<ScalingStats> scaling;
  std::string domain;
  std::uint64_t seed = 0;
  std::string manifest_hash;
};

inline nlohmann::json tensor_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_matrix(m)}};
}

inline Matrix tensor_from_json(const nlohmann::json& j) {
  return decode_matrix(j.at("data").get<std::string>(), j.at("rows").get<long>(), j.at("cols").get<long>());
}

inline nlohmann::json hyperparameters_json(const Hyperparameters& hp) {
  return {{"num_layers", hp.num_layers},
          {"hidden_units", hp.hidden_units},
          {"learning_rate", hp.learning_rate},
          {"dropout_rate", hp.dropout_rate},
          {"batch_size", hp.batch_size}};
}

inline Hyperparameters hyperparameters_from_json(const nlohmann::json& j) {
  Hyperparameters hp;
  hp.num_layers = j.at("num_layers").get<int>();
  hp.hidden_units = j.at("hidden_units").get<int>();
  hp.learning_rate = j.at("learning_rate").get<double>();
  hp.dropout_rate = j.at("dropout_rate").get<double>();
  hp.batch_size = j.at("batch_size").get<int>();
  return hp;
}

inline nlohmann::json scaling_json(const ScalingStats& s) {
  return {{"mean", encode_matrix(Eigen::Map<const Matrix>(s.mean.data(), 1, static_cast<long>(s.mean.size())))},
          {"stddev", encode_matrix(Eigen::Map<const Matrix>(s.stddev.data(), 1, static_cast<long>(s.stddev.size())))},
          {"n", s.mean.size()},
          {"hour_mean", s.hour_mean},
          {"hour_stddev", s.hour_stddev}};
}

inline ScalingStats scaling_from_json(const nlohmann::json& j) {
  const long n = j.at("n").get<long>();
  ScalingStats s;
  const Matrix mean = decode_matrix(j.at("mean").get<std::string>(), 1, n);
  const Matrix sd = decode_matrix(j.at("stddev").get<std::string>(), 1, n);
  s.mean.assign(mean.data(), mean.data() + n);
  s.stddev.assign(sd.data(), sd.data() + n);
  s.hour_mean = j.at("hour_mean").get<double>();
  s.hour_stddev = j.at("hour_stddev").get<double>();
  return s;
}

inline nlohmann::json checkpoint_json(const Checkpoint& c) {
  nlohmann::json j;
  j["format"] = "xferlos-checkpoint";
  j["version"] = kCheckpointVersion;
  j["domain"] = c.domain;
  j["features"] = c.model.features.names();
  j["gate_order"] = std::string(kGateOrder);
  j["hyperparameters"] = hyperparameters_json(c.model.hyper);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : c.model.network.layers)
    layers.push_back({{"kernel", tensor_json(l.kernel)},
                      {"recurrent_kernel", tensor_json(l.recurrent_kernel)},
                      {"bias", tensor_json(l.bias)}});
  j["layers"] = layers;
  j["dense"] = {{"weight", tensor_json(c.model.network.dense.weight)}, {"bias", tensor_json(c.model.network.dense.bias)}};
  if (c.optimizer) {
    nlohmann::json m1 = nlohmann::json::array(), m2 = nlohmann::json::array();
    for (const auto& m : c.optimizer->first_moment) m1.push_back(tensor_json(m));
    for (const auto& m : c.optimizer->second_moment) m2.push_back(tensor_json(m));
    j["optimizer"] = {{"step", c.optimizer->step}, {"first_moment", m1}, {"second_moment", m2}};
  }
  if (c.scaling) j["scaling"] = scaling_json(*c.scaling);
  j["provenance"] = {{"seed", c.seed}, {"manifest_hash", c.manifest_hash}};
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "xferlos-checkpoint") throw ValidationError("not a checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ValidationError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    if (j.at("gate_order").get<std::string>() != kGateOrder)
      throw ValidationError("checkpoint gate order '" + j.at("gate_order").get<std::string>() + "' is not supported");
    Checkpoint c;
    c.domain = j.value("domain", "");
    c.model.features = FeatureSpace(j.at("features").get<std::vector<std::string>>(), c.domain);
    c.model.hyper = hyperparameters_from_json(j.at("hyperparameters"));
    for (const auto& l : j.at("layers"))
      c.model.network.layers.push_back({tensor_from_json(l.at("kernel")), tensor_from_json(l.at("recurrent_kernel")),
                                        tensor_from_json(l.at("bias"))});
    c.model.network.dense = {tensor_from_json(j.at("dense").at("weight")), tensor_from_json(j.at("dense").at("bias"))};
    c.model.network.dropout_rate = c.model.hyper.dropout_rate;
    c.model.validate();
    if (j.contains("optimizer")) {
      AdamState s;
      s.step = j["optimizer"].at("step").get<long>();
      for (const auto& m : j["optimizer"].at("first_moment")) s.first_moment.push_back(tensor_from_json(m));
      for (const auto& m : j["optimizer"].at("second_moment")) s.second_moment.push_back(tensor_from_json(m));
      auto params = c.model.network.parameters();
      check_dim("optimizer tensors", static_cast<long>(params.size()), static_cast<long>(s.first_moment.size()));
      check_dim("optimizer tensors", static_cast<long>(params.size()), static_cast<long>(s.second_moment.size()));
      for (std::size_t i = 0; i < params.size(); ++i) {
        check_dim("optimizer rows", params[i]->rows(), s.first_moment[i].rows());
        check_dim("optimizer cols", params[i]->cols(), s.second_moment[i].cols());
      }
      c.optimizer = std::move(s);
    }
    if (j.contains("scaling")) c.scaling = scaling_from_json(j["scaling"]);
    c.seed = j.at("provenance").at("seed").get<std::uint64_t>();
    c.manifest_hash = j.at("provenance").value("manifest_hash", "");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << checkpoint_json(c).dump(1) << "\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace xferlos
