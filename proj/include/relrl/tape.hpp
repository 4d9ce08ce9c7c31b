#pragma once

#include "relrl/parameters.hpp"
#include "relrl/tensor.hpp"

#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

namespace relrl {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode recording of matrix-level operations. Each op stores its value
/// and a closure that pushes its output gradient into its parents. Parameter
/// leaves are memoized per entry; their gradients are added into the owning
/// ParameterEntry::grad when backward() runs.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Var constant(Mat<T> value);
  Var parameter(ParameterEntry<T>& entry);
  /// Memoized by address: `value` must outlive the tape (e.g. a TargetStore entry).
  Var frozen(const Mat<T>& value);

  const Mat<T>& value(Var v) const;
  /// Gradient of the last backward() output w.r.t. v (zeros if none flowed).
  Mat<T> grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Seeds d(output)/d(output) = seed for a 1x1 output and propagates.
  void backward(Var output, T seed = T(1));

  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Op-implementation interface.
  Var record(Mat<T> value, bool requires_grad, BackwardFn fn);
  Mat<T>& grad_ref(int id);
  const Mat<T>& value_of(int id) const { return nodes_[id].value; }
  bool needs(int id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::pair<int, ParameterEntry<T>*>> leaves_;
  std::unordered_map<const void*, int> memo_;
  std::unordered_map<const void*, int> frozen_memo_;
};

inline constexpr double kLeakySlope = 0.01;

// Differentiable primitives. Shapes: X is n x in, W is out x in, b is 1 x out.

template <typename T> Var linear(Tape<T>& t, Var x, Var w, Var b);
template <typename T> Var leaky_relu(Tape<T>& t, Var x);
template <typename T> Var add(Tape<T>& t, Var a, Var b);
template <typename T> Var concat_cols(Tape<T>& t, std::span<const Var> parts);
/// Y[i] = X[index[i]].
template <typename T> Var gather_rows(Tape<T>& t, Var x, std::vector<int> index);
template <typename T> Var row_slice(Tape<T>& t, Var x, int begin, int count);
/// Elementwise max over rows sharing a segment id; empty segments yield zero rows.
template <typename T> Var segment_max(Tape<T>& t, Var x, std::vector<int> segment, int num_segments);
template <typename T> Var segment_sum(Tape<T>& t, Var x, std::vector<int> segment, int num_segments);
/// Softmax of an n x 1 column within each segment.
template <typename T> Var segment_softmax(Tape<T>& t, Var scores, std::vector<int> segment, int num_segments);
/// Y = diag(w) F with w an n x 1 column.
template <typename T> Var scale_rows(Tape<T>& t, Var f, Var w);
template <typename T> Var element(Tape<T>& t, Var x, int row, int col);
template <typename T> Var sum(Tape<T>& t, Var x);
/// Sum over scalar (1x1) vars weighted by constant coefficients.
template <typename T> Var weighted_sum(Tape<T>& t, std::span<const Var> scalars, std::span<const T> coeffs);

/// log softmax_masked(logits)[index]; logits are read flat in row-major order.
template <typename T> Var categorical_log_prob(Tape<T>& t, Var logits, const Mask& mask, int index);
/// Log-probability of a subset under independent Bernoulli(sigmoid(score)) draws.
/// Entries with allowed=0 have probability exactly 0 and contribute nothing.
template <typename T>
Var bernoulli_log_prob(Tape<T>& t, Var scores, const Mask& selected, const Mask& allowed);

// Plain (non-recorded) helpers shared by the sampler and tests.

template <typename T> T leaky(T x) { return x >= T(0) ? x : T(kLeakySlope) * x; }

/// Probabilities of softmax over masked entries; masked entries are exactly 0.
/// Throws no_valid_choice when every entry is masked.
std::vector<double> softmax_masked(std::span<const double> logits, const Mask& mask);

double sigmoid(double x);
double log_sigmoid(double x);

}  // namespace relrl
