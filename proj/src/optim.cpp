#include "relrl/optim.hpp"

#include <cmath>
#include <string>

namespace relrl {

template <typename T>
double grad_norm(const BasicParameterStore<T>& store) {
  double sq = 0;
  for (const auto& [name, e] : store.entries()) {
    sq += e.grad.template cast<double>().squaredNorm();
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_grad_norm(BasicParameterStore<T>& store, double max_norm) {
  if (!(max_norm > 0)) fail(ErrorCode::invalid_argument, "clip_grad_norm: max_norm must be positive");
  const double norm = grad_norm(store);
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (auto& [name, e] : store.entries()) e.grad *= static_cast<T>(scale);
  return scale;
}

template <typename T>
void adamw_step(BasicParameterStore<T>& store, double lr, double weight_decay, const AdamWConfig& cfg) {
  store.step_count += 1;
  const double t = static_cast<double>(store.step_count);
  const T bc1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T bc2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T eps = static_cast<T>(cfg.epsilon);
  const T step = static_cast<T>(lr);
  const T shrink = static_cast<T>(1.0 - lr * weight_decay);
  for (auto& [name, e] : store.entries()) {
    if (e.grad.size() != e.value.size()) e.grad.setZero(e.value.rows(), e.value.cols());
    e.value *= shrink;
    e.first_moment = b1 * e.first_moment + (T(1) - b1) * e.grad;
    e.second_moment = b2 * e.second_moment + (T(1) - b2) * e.grad.cwiseAbs2();
    e.value.array() -= step * (e.first_moment.array() / bc1) /
                       ((e.second_moment.array() / bc2).sqrt() + eps);
    e.grad.setZero();
  }
}

template <typename T>
void polyak_update(BasicTargetStore<T>& target, const BasicParameterStore<T>& source, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) fail(ErrorCode::invalid_argument, "polyak_update: rho must lie in [0, 1]");
  if (!target.same_keys(source)) fail(ErrorCode::consistency, "polyak_update: target and source key sets differ");
  const T r = static_cast<T>(rho);
  auto it = source.entries().begin();
  for (auto& [name, value] : target.values()) {
    if (rho == 1.0) {
      value = it->second.value;
    } else if (rho != 0.0) {
      value = (T(1) - r) * value + r * it->second.value;
    }
    ++it;
  }
}

template double grad_norm<float>(const BasicParameterStore<float>&);
template double grad_norm<double>(const BasicParameterStore<double>&);
template double clip_grad_norm<float>(BasicParameterStore<float>&, double);
template double clip_grad_norm<double>(BasicParameterStore<double>&, double);
template void adamw_step<float>(BasicParameterStore<float>&, double, double, const AdamWConfig&);
template void adamw_step<double>(BasicParameterStore<double>&, double, double, const AdamWConfig&);
template void polyak_update<float>(BasicTargetStore<float>&, const BasicParameterStore<float>&, double);
template void polyak_update<double>(BasicTargetStore<double>&, const BasicParameterStore<double>&, double);

}  // namespace relrl
