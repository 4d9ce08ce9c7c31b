#pragma once

#include "relrl/parameters.hpp"

namespace relrl {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Global L2 norm over every gradient in the store.
template <typename T>
double grad_norm(const BasicParameterStore<T>& store);

/// Rescales all gradients so their global norm is at most max_norm. Returns the
/// applied scale factor (1 when no rescaling was needed).
template <typename T>
double clip_grad_norm(BasicParameterStore<T>& store, double max_norm);

/// One decoupled-weight-decay Adam step; increments step_count and clears grads.
template <typename T>
void adamw_step(BasicParameterStore<T>& store, double lr, double weight_decay, const AdamWConfig& cfg = {});

/// target := (1 - rho) * target + rho * source, entry by entry.
template <typename T>
void polyak_update(BasicTargetStore<T>& target, const BasicParameterStore<T>& source, double rho);

}  // namespace relrl
