#include "relrl/parameters.hpp"

#include <cmath>

namespace relrl {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::dimension: return "dimension error";
    case ErrorCode::validation: return "validation error";
    case ErrorCode::no_valid_choice: return "no valid choice";
    case ErrorCode::no_valid_action: return "no valid action";
    case ErrorCode::state: return "state error";
    case ErrorCode::consistency: return "consistency error";
    case ErrorCode::illegal_action: return "illegal action";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::parse: return "parse error";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::schema: return "schema error";
    case ErrorCode::mode: return "mode error";
    case ErrorCode::generation: return "generation error";
  }
  return "unknown error";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

template <typename T>
typename BasicParameterStore<T>::Entry& BasicParameterStore<T>::add(const std::string& name, Mat<T> value) {
  if (entries_.count(name) != 0) fail(ErrorCode::consistency, "parameter '" + name + "' already exists");
  Entry e;
  e.grad = Mat<T>::Zero(value.rows(), value.cols());
  e.first_moment = Mat<T>::Zero(value.rows(), value.cols());
  e.second_moment = Mat<T>::Zero(value.rows(), value.cols());
  e.value = std::move(value);
  return entries_.emplace(name, std::move(e)).first->second;
}

template <typename T>
typename BasicParameterStore<T>::Entry& BasicParameterStore<T>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail(ErrorCode::consistency, "unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
const typename BasicParameterStore<T>::Entry& BasicParameterStore<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail(ErrorCode::consistency, "unknown parameter '" + name + "'");
  return it->second;
}

template <typename T>
std::size_t BasicParameterStore<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

template <typename T>
void BasicParameterStore<T>::zero_grad() {
  for (auto& [name, e] : entries_) e.grad.setZero(e.value.rows(), e.value.cols());
}

template class BasicParameterStore<float>;
template class BasicParameterStore<double>;

template <typename T>
BasicTargetStore<T>::BasicTargetStore(const BasicParameterStore<T>& source) {
  for (const auto& [name, e] : source.entries()) values_.emplace(name, e.value);
}

template <typename T>
const Mat<T>& BasicTargetStore<T>::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) fail(ErrorCode::consistency, "unknown target parameter '" + name + "'");
  return it->second;
}

template <typename T>
Mat<T>& BasicTargetStore<T>::at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) fail(ErrorCode::consistency, "unknown target parameter '" + name + "'");
  return it->second;
}

template <typename T>
bool BasicTargetStore<T>::same_keys(const BasicParameterStore<T>& source) const {
  if (values_.size() != source.size()) return false;
  auto a = values_.begin();
  auto b = source.entries().begin();
  for (; a != values_.end(); ++a, ++b) {
    if (a->first != b->first) return false;
    if (a->second.rows() != b->second.value.rows() || a->second.cols() != b->second.value.cols()) return false;
  }
  return true;
}

template class BasicTargetStore<float>;
template class BasicTargetStore<double>;

Matf init_weight(int out, int in, std::mt19937_64& rng) {
  const double bound = in > 0 ? 1.0 / std::sqrt(static_cast<double>(in)) : 0.0;
  std::uniform_real_distribution<double> u(-bound, bound);
  Matf w(out, in);
  for (int r = 0; r < out; ++r) {
    for (int c = 0; c < in; ++c) w(r, c) = static_cast<float>(u(rng));
  }
  return w;
}

}  // namespace relrl
