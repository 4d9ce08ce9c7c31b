#pragma once

#include "relrl/parameters.hpp"
#include "relrl/tape.hpp"

#include <functional>
#include <string>
#include <vector>

namespace relrl {

struct GradCheckFailure {
  std::string parameter;
  int row = 0;
  int col = 0;
  double analytic = 0;
  double numeric = 0;
  double error = 0;
};

struct GradCheckReport {
  std::size_t coordinates = 0;
  double max_error = 0;
  std::vector<GradCheckFailure> failures;
  bool passed() const { return failures.empty(); }
};

/// A deterministic scalar computation over trainable parameters.
using ScalarComputation = std::function<Var(Tape<double>&, BasicParameterStore<double>&)>;

/// Compares reverse-mode gradients against central differences for every
/// parameter coordinate: |analytic - numeric| / max(1, |analytic|) <= tolerance.
GradCheckReport grad_check(BasicParameterStore<double>& store, const ScalarComputation& computation,
                           double epsilon, double tolerance);

}  // namespace relrl
