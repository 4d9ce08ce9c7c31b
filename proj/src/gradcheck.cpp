#include "relrl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace relrl {

GradCheckReport grad_check(BasicParameterStore<double>& store, const ScalarComputation& computation,
                           double epsilon, double tolerance) {
  store.zero_grad();
  {
    Tape<double> tape;
    Var out = computation(tape, store);
    tape.backward(out);
  }
  GradCheckReport report;
  auto evaluate = [&]() {
    Tape<double> tape;
    Var out = computation(tape, store);
    return tape.value(out)(0, 0);
  };
  for (auto& [name, entry] : store.entries()) {
    const Matd analytic = entry.grad;
    for (Eigen::Index r = 0; r < entry.value.rows(); ++r) {
      for (Eigen::Index c = 0; c < entry.value.cols(); ++c) {
        const double saved = entry.value(r, c);
        entry.value(r, c) = saved + epsilon;
        const double plus = evaluate();
        entry.value(r, c) = saved - epsilon;
        const double minus = evaluate();
        entry.value(r, c) = saved;
        const double numeric = (plus - minus) / (2 * epsilon);
        const double a = analytic(r, c);
        const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
        report.coordinates += 1;
        report.max_error = std::max(report.max_error, err);
        if (!(err <= tolerance)) {
          report.failures.push_back({name, static_cast<int>(r), static_cast<int>(c), a, numeric, err});
        }
      }
    }
  }
  store.zero_grad();
  return report;
}

}  // namespace relrl
