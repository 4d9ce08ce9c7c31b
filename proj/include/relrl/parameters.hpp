#pragma once

#include "relrl/error.hpp"
#include "relrl/tensor.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace relrl {

/// One named parameter: a (rows x cols) value with matching gradient accumulator
/// and AdamW moment buffers. Bias vectors are stored as 1 x n.
template <typename T>
struct ParameterEntry {
  Mat<T> value;
  Mat<T> grad;
  Mat<T> first_moment;
  Mat<T> second_moment;
};

/// Named, shaped, differentiable parameters. Iteration order is the sorted name
/// order, which keeps checkpoints and optimizer sweeps deterministic.
template <typename T>
class BasicParameterStore {
 public:
  using Entry = ParameterEntry<T>;

  /// Registers a new entry; registering an existing name is an error.
  Entry& add(const std::string& name, Mat<T> value);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Entry& at(const std::string& name);
  const Entry& at(const std::string& name) const;

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();

  /// Converted copy (values, grads and moments), e.g. float training store ->
  /// double store for finite-difference checks.
  template <typename U>
  BasicParameterStore<U> cast() const {
    BasicParameterStore<U> out;
    for (const auto& [name, e] : entries_) {
      auto& o = out.add(name, e.value.template cast<U>());
      o.grad = e.grad.template cast<U>();
      o.first_moment = e.first_moment.template cast<U>();
      o.second_moment = e.second_moment.template cast<U>();
    }
    out.step_count = step_count;
    return out;
  }

  std::int64_t step_count = 0;

 private:
  std::map<std::string, Entry> entries_;
};

using ParameterStore = BasicParameterStore<float>;

/// Values-only copy of a ParameterStore tracked by Polyak averaging. Its key set
/// always equals the source store's key set.
template <typename T>
class BasicTargetStore {
 public:
  BasicTargetStore() = default;
  explicit BasicTargetStore(const BasicParameterStore<T>& source);

  const Mat<T>& at(const std::string& name) const;
  Mat<T>& at(const std::string& name);
  bool contains(const std::string& name) const { return values_.count(name) != 0; }

  std::map<std::string, Mat<T>>& values() { return values_; }
  const std::map<std::string, Mat<T>>& values() const { return values_; }

  bool same_keys(const BasicParameterStore<T>& source) const;

 private:
  std::map<std::string, Mat<T>> values_;
};

using TargetStore = BasicTargetStore<float>;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights of shape (out, in).
Matf init_weight(int out, int in, std::mt19937_64& rng);

}  // namespace relrl
