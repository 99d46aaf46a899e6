#pragma once

#include "xferlos/core/feature_space.hpp"
#include "xferlos/core/lstm.hpp"

namespace xferlos {

/// Hyperparameters a trained model carries with it.
struct Hyperparameters {
  int num_layers = 1;
  int hidden_units = 16;
  double learning_rate = 1e-3;
  double dropout_rate = 0.1;
  int batch_size = 32;

  ModelConfig model_config() const { return {hidden_units, num_layers, dropout_rate, kTimesteps}; }

  friend bool operator==(const Hyperparameters&, const Hyperparameters&) = default;
};

/// A network bound to the feature space whose order defines its kernel rows.
struct LstmModel {
  FeatureSpace features;
  LstmNetwork network;
  Hyperparameters hyper;

  static LstmModel initialize(FeatureSpace features, const Hyperparameters& hp, Rng& rng) {
    LstmModel m;
    m.network = LstmNetwork::initialize(static_cast<long>(features.size()), hp.model_config(), rng);
    m.features = std::move(features);
    m.hyper = hp;
    return m;
  }

  void validate() const {
    network.validate();
    check_dim("kernel rows (feature space size)", static_cast<long>(features.size()), network.inputs());
    check_dim("hidden units", hyper.hidden_units, network.units());
  }

  Vector predict(const Sequence& batch) const { return forward_many_to_one(batch, network, false, nullptr); }

  /// d prediction_i / d batch, per stay; predictions optionally returned.
  Sequence input_gradient(const Sequence& batch, Vector* predictions = nullptr) const {
    return prediction_input_gradient(batch, network, predictions);
  }
};

}  // namespace xferlos
