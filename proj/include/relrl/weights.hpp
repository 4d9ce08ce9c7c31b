#pragma once

#include "relrl/parameters.hpp"
#include "relrl/tape.hpp"

#include <string>

namespace relrl {

/// Read access to a parameter set for one forward pass. Trainable views route
/// gradients into the store; frozen and target views record constants.
template <typename T>
class Weights {
 public:
  static Weights trainable(BasicParameterStore<T>& store) {
    Weights w;
    w.store_ = &store;
    return w;
  }
  static Weights frozen(const BasicParameterStore<T>& store) {
    Weights w;
    w.cstore_ = &store;
    return w;
  }
  static Weights target(const BasicTargetStore<T>& store) {
    Weights w;
    w.target_ = &store;
    return w;
  }

  Var get(Tape<T>& tape, const std::string& name) const {
    if (store_ != nullptr) return tape.parameter(store_->at(name));
    if (cstore_ != nullptr) return tape.frozen(cstore_->at(name).value);
    return tape.frozen(target_->at(name));
  }

  bool contains(const std::string& name) const {
    if (store_ != nullptr) return store_->contains(name);
    if (cstore_ != nullptr) return cstore_->contains(name);
    return target_->contains(name);
  }

 private:
  Weights() = default;
  BasicParameterStore<T>* store_ = nullptr;
  const BasicParameterStore<T>* cstore_ = nullptr;
  const BasicTargetStore<T>* target_ = nullptr;
};

/// y = x W^T + b with parameters `<prefix>.w` and `<prefix>.b`.
template <typename T>
Var apply_linear(Tape<T>& tape, const Weights<T>& w, const std::string& prefix, Var x) {
  return linear(tape, x, w.get(tape, prefix + ".w"), w.get(tape, prefix + ".b"));
}

/// LeakyReLU(x W^T + b): the single non-linear layer used throughout the model.
template <typename T>
Var apply_dense(Tape<T>& tape, const Weights<T>& w, const std::string& prefix, Var x) {
  return leaky_relu(tape, apply_linear(tape, w, prefix, x));
}

}  // namespace relrl
