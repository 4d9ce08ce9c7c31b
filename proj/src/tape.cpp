#include "relrl/tape.hpp"

#include "relrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace relrl {

namespace {

std::string shape_of(int rows, int cols) {
  return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

template <typename T>
void check_shape(const Mat<T>& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    fail(ErrorCode::dimension, std::string(what) + ": expected " + shape_of(rows, cols) +
                                   ", got " + shape_of(m.rows(), m.cols()));
  }
}

}  // namespace

template <typename T>
Var Tape<T>::record(Mat<T> value, bool requires_grad, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Var Tape<T>::constant(Mat<T> value) {
  return record(std::move(value), false, nullptr);
}

template <typename T>
Var Tape<T>::parameter(ParameterEntry<T>& entry) {
  auto it = memo_.find(&entry);
  if (it != memo_.end()) return Var{it->second};
  Var v = record(entry.value, true, nullptr);
  leaves_.emplace_back(v.id, &entry);
  memo_.emplace(&entry, v.id);
  return v;
}

template <typename T>
Var Tape<T>::frozen(const Mat<T>& value) {
  auto it = frozen_memo_.find(&value);
  if (it != frozen_memo_.end()) return Var{it->second};
  Var v = record(value, false, nullptr);
  frozen_memo_.emplace(&value, v.id);
  return v;
}

template <typename T>
const Mat<T>& Tape<T>::value(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
    fail(ErrorCode::state, "tape: invalid variable");
  }
  return nodes_[v.id].value;
}

template <typename T>
Mat<T> Tape<T>::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (!n.has_grad) return Mat<T>::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <typename T>
bool Tape<T>::requires_grad(Var v) const {
  return nodes_.at(v.id).requires_grad;
}

template <typename T>
Mat<T>& Tape<T>::grad_ref(int id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

template <typename T>
void Tape<T>::backward(Var output, T seed) {
  if (nodes_.empty() || output.id < 0 || output.id >= static_cast<int>(nodes_.size())) {
    fail(ErrorCode::state, "backward called without a recorded forward computation");
  }
  if (nodes_[output.id].value.size() != 1) {
    fail(ErrorCode::dimension, "backward requires a scalar output");
  }
  for (Node& n : nodes_) n.has_grad = false;
  if (!nodes_[output.id].requires_grad) return;
  grad_ref(output.id)(0, 0) = seed;
  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, id);
  }
  for (auto& [id, entry] : leaves_) {
    if (!nodes_[id].has_grad) continue;
    if (entry->grad.rows() != entry->value.rows() || entry->grad.cols() != entry->value.cols()) {
      entry->grad.setZero(entry->value.rows(), entry->value.cols());
    }
    entry->grad += nodes_[id].grad;
  }
}

template <typename T>
void Tape<T>::clear() {
  nodes_.clear();
  leaves_.clear();
  memo_.clear();
  frozen_memo_.clear();
}

template class Tape<float>;
template class Tape<double>;

// ---------------------------------------------------------------------------

template <typename T>
Var linear(Tape<T>& t, Var x, Var w, Var b) {
  const Mat<T>& X = t.value(x);
  const Mat<T>& W = t.value(w);
  const Mat<T>& B = t.value(b);
  if (X.cols() != W.cols()) {
    fail(ErrorCode::dimension, "linear: input width " + std::to_string(X.cols()) +
                                   " does not match weight " + shape_of(W.rows(), W.cols()));
  }
  check_shape(B, 1, W.rows(), "linear bias");
  Mat<T> y(X.rows(), W.rows());
  y.noalias() = X * W.transpose();
  y.rowwise() += B.row(0);
  bool rg = t.needs(x.id) || t.needs(w.id) || t.needs(b.id);
  return t.record(std::move(y), rg, [x, w, b](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    if (tp.needs(x.id)) tp.grad_ref(x.id).noalias() += dy * tp.value_of(w.id);
    if (tp.needs(w.id)) tp.grad_ref(w.id).noalias() += dy.transpose() * tp.value_of(x.id);
    if (tp.needs(b.id)) tp.grad_ref(b.id) += dy.colwise().sum();
  });
}

template <typename T>
Var leaky_relu(Tape<T>& t, Var x) {
  const T slope = T(kLeakySlope);
  Mat<T> y = t.value(x).unaryExpr([slope](T v) { return v >= T(0) ? v : slope * v; });
  return t.record(std::move(y), t.needs(x.id), [x, slope](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    const Mat<T>& xv = tp.value_of(x.id);
    tp.grad_ref(x.id) += dy.binaryExpr(xv, [slope](T g, T v) { return v >= T(0) ? g : slope * g; });
  });
}

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  const Mat<T>& A = t.value(a);
  check_shape(t.value(b), A.rows(), A.cols(), "add");
  Mat<T> y = A + t.value(b);
  bool rg = t.needs(a.id) || t.needs(b.id);
  return t.record(std::move(y), rg, [a, b](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    if (tp.needs(a.id)) tp.grad_ref(a.id) += dy;
    if (tp.needs(b.id)) tp.grad_ref(b.id) += dy;
  });
}

template <typename T>
Var concat_cols(Tape<T>& t, std::span<const Var> parts) {
  if (parts.empty()) fail(ErrorCode::dimension, "concat_cols: no inputs");
  Eigen::Index rows = t.value(parts[0]).rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (Var p : parts) {
    if (t.value(p).rows() != rows) fail(ErrorCode::dimension, "concat_cols: row count mismatch");
    cols += t.value(p).cols();
    rg = rg || t.needs(p.id);
  }
  Mat<T> y(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const Mat<T>& v = t.value(p);
    y.middleCols(at, v.cols()) = v;
    at += v.cols();
  }
  std::vector<Var> ids(parts.begin(), parts.end());
  return t.record(std::move(y), rg, [ids = std::move(ids)](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    Eigen::Index at = 0;
    for (Var p : ids) {
      Eigen::Index c = tp.value_of(p.id).cols();
      if (tp.needs(p.id) && c > 0) tp.grad_ref(p.id) += dy.middleCols(at, c);
      at += c;
    }
  });
}

template <typename T>
Var gather_rows(Tape<T>& t, Var x, std::vector<int> index) {
  const Mat<T>& X = t.value(x);
  Mat<T> y(static_cast<Eigen::Index>(index.size()), X.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= X.rows()) fail(ErrorCode::dimension, "gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(i)) = X.row(index[i]);
  }
  return t.record(std::move(y), t.needs(x.id), [x, index = std::move(index)](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    Mat<T>& dx = tp.grad_ref(x.id);
    for (std::size_t i = 0; i < index.size(); ++i) dx.row(index[i]) += dy.row(static_cast<Eigen::Index>(i));
  });
}

template <typename T>
Var row_slice(Tape<T>& t, Var x, int begin, int count) {
  const Mat<T>& X = t.value(x);
  if (begin < 0 || count < 0 || begin + count > X.rows()) fail(ErrorCode::dimension, "row_slice: out of range");
  Mat<T> y = X.middleRows(begin, count);
  return t.record(std::move(y), t.needs(x.id), [x, begin, count](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    tp.grad_ref(x.id).middleRows(begin, count) += dy;
  });
}

template <typename T>
Var segment_max(Tape<T>& t, Var x, std::vector<int> segment, int num_segments) {
  const Mat<T>& X = t.value(x);
  if (static_cast<Eigen::Index>(segment.size()) != X.rows()) fail(ErrorCode::dimension, "segment_max: segment size");
  const Eigen::Index d = X.cols();
  Mat<T> y = Mat<T>::Constant(num_segments, d, -std::numeric_limits<T>::infinity());
  std::vector<int> arg(static_cast<std::size_t>(num_segments) * d, -1);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int s = segment[i];
    for (Eigen::Index c = 0; c < d; ++c) {
      if (X(i, c) > y(s, c)) {
        y(s, c) = X(i, c);
        arg[s * d + c] = static_cast<int>(i);
      }
    }
  }
  for (std::size_t k = 0; k < arg.size(); ++k) {
    if (arg[k] < 0) y(static_cast<Eigen::Index>(k) / d, static_cast<Eigen::Index>(k) % d) = T(0);
  }
  return t.record(std::move(y), t.needs(x.id), [x, d, arg = std::move(arg)](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    Mat<T>& dx = tp.grad_ref(x.id);
    for (std::size_t k = 0; k < arg.size(); ++k) {
      if (arg[k] >= 0) dx(arg[k], static_cast<Eigen::Index>(k) % d) += dy(static_cast<Eigen::Index>(k) / d, static_cast<Eigen::Index>(k) % d);
    }
  });
}

template <typename T>
Var segment_sum(Tape<T>& t, Var x, std::vector<int> segment, int num_segments) {
  const Mat<T>& X = t.value(x);
  if (static_cast<Eigen::Index>(segment.size()) != X.rows()) fail(ErrorCode::dimension, "segment_sum: segment size");
  Mat<T> y = Mat<T>::Zero(num_segments, X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y.row(segment[i]) += X.row(i);
  return t.record(std::move(y), t.needs(x.id), [x, segment = std::move(segment)](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    Mat<T>& dx = tp.grad_ref(x.id);
    for (std::size_t i = 0; i < segment.size(); ++i) dx.row(static_cast<Eigen::Index>(i)) += dy.row(segment[i]);
  });
}

template <typename T>
Var segment_softmax(Tape<T>& t, Var scores, std::vector<int> segment, int num_segments) {
  const Mat<T>& S = t.value(scores);
  if (S.cols() != 1 || static_cast<Eigen::Index>(segment.size()) != S.rows()) {
    fail(ErrorCode::dimension, "segment_softmax: expects an n x 1 column with n segment ids");
  }
  std::vector<T> mx(num_segments, -std::numeric_limits<T>::infinity());
  for (Eigen::Index i = 0; i < S.rows(); ++i) mx[segment[i]] = std::max(mx[segment[i]], S(i, 0));
  Mat<T> y(S.rows(), 1);
  std::vector<T> total(num_segments, T(0));
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    y(i, 0) = std::exp(S(i, 0) - mx[segment[i]]);
    total[segment[i]] += y(i, 0);
  }
  for (Eigen::Index i = 0; i < S.rows(); ++i) y(i, 0) /= total[segment[i]];
  return t.record(std::move(y), t.needs(scores.id),
                  [scores, num_segments, segment = std::move(segment)](Tape<T>& tp, int self) {
                    const Mat<T>& dy = tp.grad_ref(self);
                    const Mat<T>& yv = tp.value_of(self);
                    std::vector<T> dot(num_segments, T(0));
                    for (std::size_t i = 0; i < segment.size(); ++i) dot[segment[i]] += yv(i, 0) * dy(i, 0);
                    Mat<T>& ds = tp.grad_ref(scores.id);
                    for (std::size_t i = 0; i < segment.size(); ++i) {
                      ds(i, 0) += yv(i, 0) * (dy(i, 0) - dot[segment[i]]);
                    }
                  });
}

template <typename T>
Var scale_rows(Tape<T>& t, Var f, Var w) {
  const Mat<T>& F = t.value(f);
  const Mat<T>& W = t.value(w);
  check_shape(W, F.rows(), 1, "scale_rows weights");
  Mat<T> y = F.array().colwise() * W.col(0).array();
  bool rg = t.needs(f.id) || t.needs(w.id);
  return t.record(std::move(y), rg, [f, w](Tape<T>& tp, int self) {
    const Mat<T>& dy = tp.grad_ref(self);
    if (tp.needs(f.id)) tp.grad_ref(f.id).array() += dy.array().colwise() * tp.value_of(w.id).col(0).array();
    if (tp.needs(w.id)) tp.grad_ref(w.id).col(0) += (dy.array() * tp.value_of(f.id).array()).rowwise().sum().matrix();
  });
}

template <typename T>
Var element(Tape<T>& t, Var x, int row, int col) {
  const Mat<T>& X = t.value(x);
  if (row < 0 || col < 0 || row >= X.rows() || col >= X.cols()) fail(ErrorCode::dimension, "element: out of range");
  Mat<T> y(1, 1);
  y(0, 0) = X(row, col);
  return t.record(std::move(y), t.needs(x.id), [x, row, col](Tape<T>& tp, int self) {
    tp.grad_ref(x.id)(row, col) += tp.grad_ref(self)(0, 0);
  });
}

template <typename T>
Var sum(Tape<T>& t, Var x) {
  Mat<T> y(1, 1);
  y(0, 0) = t.value(x).sum();
  return t.record(std::move(y), t.needs(x.id), [x](Tape<T>& tp, int self) {
    tp.grad_ref(x.id).array() += tp.grad_ref(self)(0, 0);
  });
}

template <typename T>
Var weighted_sum(Tape<T>& t, std::span<const Var> scalars, std::span<const T> coeffs) {
  if (scalars.size() != coeffs.size()) fail(ErrorCode::dimension, "weighted_sum: size mismatch");
  Mat<T> y = Mat<T>::Zero(1, 1);
  bool rg = false;
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    const Mat<T>& v = t.value(scalars[k]);
    if (v.size() != 1) fail(ErrorCode::dimension, "weighted_sum: expects scalar inputs");
    y(0, 0) += coeffs[k] * v(0, 0);
    rg = rg || t.needs(scalars[k].id);
  }
  std::vector<Var> ids(scalars.begin(), scalars.end());
  std::vector<T> cs(coeffs.begin(), coeffs.end());
  return t.record(std::move(y), rg, [ids = std::move(ids), cs = std::move(cs)](Tape<T>& tp, int self) {
    const T g = tp.grad_ref(self)(0, 0);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs(ids[k].id)) tp.grad_ref(ids[k].id)(0, 0) += cs[k] * g;
    }
  });
}

template <typename T>
Var categorical_log_prob(Tape<T>& t, Var logits, const Mask& mask, int index) {
  const Mat<T>& L = t.value(logits);
  const Eigen::Index n = L.size();
  if (static_cast<Eigen::Index>(mask.size()) != n) fail(ErrorCode::dimension, "categorical_log_prob: mask size");
  if (!any(mask)) fail(ErrorCode::no_valid_choice, "categorical_log_prob: every choice is masked");
  if (index < 0 || index >= n || !mask[index]) {
    fail(ErrorCode::consistency, "categorical_log_prob: chosen index " + std::to_string(index) + " is masked");
  }
  const T* l = L.data();
  T mx = -std::numeric_limits<T>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask[i]) mx = std::max(mx, l[i]);
  }
  T total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask[i]) total += std::exp(l[i] - mx);
  }
  const T lse = mx + std::log(total);
  Mat<T> y(1, 1);
  y(0, 0) = l[index] - lse;
  return t.record(std::move(y), t.needs(logits.id), [logits, mask, index, lse](Tape<T>& tp, int self) {
    const T g = tp.grad_ref(self)(0, 0);
    const T* lv = tp.value_of(logits.id).data();
    T* d = tp.grad_ref(logits.id).data();
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const T p = std::exp(lv[i] - lse);
      d[i] += g * ((static_cast<int>(i) == index ? T(1) : T(0)) - p);
    }
  });
}

template <typename T>
Var bernoulli_log_prob(Tape<T>& t, Var scores, const Mask& selected, const Mask& allowed) {
  const Mat<T>& S = t.value(scores);
  const Eigen::Index n = S.size();
  if (static_cast<Eigen::Index>(selected.size()) != n || static_cast<Eigen::Index>(allowed.size()) != n) {
    fail(ErrorCode::dimension, "bernoulli_log_prob: mask size");
  }
  const T* s = S.data();
  T lp = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!allowed[i]) {
      if (selected[i]) fail(ErrorCode::consistency, "bernoulli_log_prob: selected node is masked");
      continue;
    }
    lp += static_cast<T>(selected[i] ? log_sigmoid(static_cast<double>(s[i]))
                                     : log_sigmoid(-static_cast<double>(s[i])));
  }
  Mat<T> y(1, 1);
  y(0, 0) = lp;
  return t.record(std::move(y), t.needs(scores.id), [scores, selected, allowed](Tape<T>& tp, int self) {
    const T g = tp.grad_ref(self)(0, 0);
    const T* sv = tp.value_of(scores.id).data();
    T* d = tp.grad_ref(scores.id).data();
    for (std::size_t i = 0; i < allowed.size(); ++i) {
      if (!allowed[i]) continue;
      const T p = static_cast<T>(sigmoid(static_cast<double>(sv[i])));
      d[i] += g * ((selected[i] ? T(1) : T(0)) - p);
    }
  });
}

#define RELRL_INSTANTIATE_OPS(T)                                                                  \
  template Var linear<T>(Tape<T>&, Var, Var, Var);                                                \
  template Var leaky_relu<T>(Tape<T>&, Var);                                                      \
  template Var add<T>(Tape<T>&, Var, Var);                                                        \
  template Var concat_cols<T>(Tape<T>&, std::span<const Var>);                                    \
  template Var gather_rows<T>(Tape<T>&, Var, std::vector<int>);                                   \
  template Var row_slice<T>(Tape<T>&, Var, int, int);                                             \
  template Var segment_max<T>(Tape<T>&, Var, std::vector<int>, int);                              \
  template Var segment_sum<T>(Tape<T>&, Var, std::vector<int>, int);                              \
  template Var segment_softmax<T>(Tape<T>&, Var, std::vector<int>, int);                          \
  template Var scale_rows<T>(Tape<T>&, Var, Var);                                                 \
  template Var element<T>(Tape<T>&, Var, int, int);                                               \
  template Var sum<T>(Tape<T>&, Var);                                                             \
  template Var weighted_sum<T>(Tape<T>&, std::span<const Var>, std::span<const T>);               \
  template Var categorical_log_prob<T>(Tape<T>&, Var, const Mask&, int);                          \
  template Var bernoulli_log_prob<T>(Tape<T>&, Var, const Mask&, const Mask&);

RELRL_INSTANTIATE_OPS(float)
RELRL_INSTANTIATE_OPS(double)

#undef RELRL_INSTANTIATE_OPS

// ---------------------------------------------------------------------------

std::vector<double> softmax_masked(std::span<const double> logits, const Mask& mask) {
  if (mask.size() != logits.size()) fail(ErrorCode::dimension, "softmax_masked: mask size");
  if (!any(mask)) fail(ErrorCode::no_valid_choice, "softmax_masked: every choice is masked");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask[i]) mx = std::max(mx, logits[i]);
  }
  std::vector<double> p(logits.size(), 0.0);
  double total = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    p[i] = std::exp(logits[i] - mx);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  // log(sigmoid(x)) = -softplus(-x)
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

}  // namespace relrl
