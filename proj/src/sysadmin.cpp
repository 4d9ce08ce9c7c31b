#include "relrl/sysadmin.hpp"

#include "relrl/error.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

namespace relrl::sysadmin {

double stay_on_probability(int deps_on, int deps_total) {
  return kStayOnFactor * (1.0 + deps_on) / (1.0 + deps_total);
}

double reward(const State& s, const Mask& resets) {
  if (static_cast<int>(resets.size()) != s.n) fail(ErrorCode::dimension, "sysadmin: reset mask size");
  return static_cast<double>(count(s.on)) - kResetCost * count(resets);
}

double step(State& s, const Mask& resets, std::mt19937_64& rng) {
  const double r = reward(s, resets);
  std::vector<int> deps_total(s.n, 0);
  std::vector<int> deps_on(s.n, 0);
  for (const auto& [i, j] : s.deps) {
    ++deps_total[j];
    deps_on[j] += s.on[i] ? 1 : 0;
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mask next(s.n, 0);
  for (int c = 0; c < s.n; ++c) {
    // One draw per computer keeps the random stream independent of the action.
    const double u = unit(rng);
    const double p = s.on[c] ? stay_on_probability(deps_on[c], deps_total[c]) : kRebootProbability;
    next[c] = resets[c] ? 1 : (u < p);
  }
  s.on = std::move(next);
  return r;
}

State generate(int n, std::mt19937_64& rng) {
  if (n < 4) fail(ErrorCode::invalid_argument, "sysadmin needs at least 4 computers");
  State s;
  s.n = n;
  s.on.assign(n, 1);
  std::vector<int> others(n - 1);
  for (int i = 0; i < n; ++i) {
    const int k = std::uniform_int_distribution<int>(1, 3)(rng);
    std::iota(others.begin(), others.begin() + i, 0);
    std::iota(others.begin() + i, others.end(), i + 1);
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    for (int a = 0; a < k; ++a) {
      const int b = std::uniform_int_distribution<int>(a, n - 2)(rng);
      std::swap(others[a], others[b]);
      s.deps.emplace_back(i, others[a]);
    }
  }
  return s;
}

GraphSignature signature() { return GraphSignature{1, 0, 1, 0}; }

StateGraph encode(const State& s) {
  Matd features(s.n, 1);
  for (int c = 0; c < s.n; ++c) features(c, 0) = s.on[c] ? 1.0 : 0.0;
  std::vector<int> src, dst;
  for (const auto& [i, j] : s.deps) {
    src.push_back(i);
    dst.push_back(j);
  }
  std::vector<int> type(src.size(), 0);
  const Eigen::Index edges = static_cast<Eigen::Index>(src.size());
  return StateGraph::from_arrays(std::move(features), std::move(src), std::move(dst), std::move(type),
                                 Matd(edges, 0), {}, 1);
}

const std::vector<ActionSchema>& schemas(Mode mode) {
  static const std::vector<ActionSchema> single{{"noop", ActionKind::elementary, 0, false},
                                                {"reset", ActionKind::parametric, 1, false}};
  static const std::vector<ActionSchema> multi{{"reset", ActionKind::set, 0, false}};
  return mode == Mode::single ? single : multi;
}

Mask resets_of(const ActionChoice& a, Mode mode, int n) {
  Mask resets(n, 0);
  if (mode == Mode::multi) {
    if (a.action_id != 0 || static_cast<int>(a.subset.size()) != n || !a.params.empty()) {
      fail(ErrorCode::mode, "sysadmin multi mode expects one reset(X) set action");
    }
    return a.subset;
  }
  if (a.action_id == 0 && a.params.empty() && a.subset.empty()) return resets;
  if (a.action_id == 1 && a.params.size() == 1 && a.subset.empty()) {
    if (a.params[0] < 0 || a.params[0] >= n) fail(ErrorCode::illegal_action, "sysadmin: computer out of range");
    resets[a.params[0]] = 1;
    return resets;
  }
  fail(ErrorCode::mode, "sysadmin single mode resets at most one computer");
}

ActionChoice baseline_action(const State& s, Mode mode, std::mt19937_64& rng) {
  ActionChoice a;
  a.action_id = 0;
  if (mode == Mode::multi) {
    a.subset.assign(s.n, 0);
    for (int c = 0; c < s.n; ++c) a.subset[c] = s.on[c] ? 0 : 1;
    return a;
  }
  std::vector<int> offline;
  for (int c = 0; c < s.n; ++c) {
    if (!s.on[c]) offline.push_back(c);
  }
  if (offline.empty()) return a;
  a.action_id = 1;
  const auto k = std::uniform_int_distribution<std::size_t>(0, offline.size() - 1)(rng);
  a.params = {offline[k]};
  return a;
}

std::string save(const State& s) {
  std::ostringstream out;
  out << s.n << '\n';
  for (const auto& [i, j] : s.deps) out << i << ' ' << j << '\n';
  return out.str();
}

State load(const std::string& text) {
  std::istringstream in(text);
  State s;
  if (!(in >> s.n) || s.n < 1) fail(ErrorCode::parse, "sysadmin: missing computer count");
  int i = 0;
  int j = 0;
  while (in >> i) {
    if (!(in >> j)) fail(ErrorCode::parse, "sysadmin: dependency line needs two computers");
    if (i < 0 || i >= s.n || j < 0 || j >= s.n || i == j) fail(ErrorCode::parse, "sysadmin: invalid dependency");
    s.deps.emplace_back(i, j);
  }
  if (!in.eof()) fail(ErrorCode::parse, "sysadmin: unexpected token");
  s.on.assign(s.n, 1);
  return s;
}

SysAdminEnv::SysAdminEnv(int n, Mode mode) : n_(n), mode_(mode) {
  if (n < 4) fail(ErrorCode::invalid_argument, "sysadmin needs at least 4 computers");
  state_.n = n;
  state_.on.assign(n, 1);
}

void SysAdminEnv::reset(std::mt19937_64& rng) { state_ = generate(n_, rng); }

std::shared_ptr<const Preconditions> SysAdminEnv::preconditions() const {
  return std::make_shared<Unconstrained>(n_, static_cast<int>(schemas().size()));
}

StepOutcome SysAdminEnv::step(const ActionChoice& action, std::mt19937_64& rng) {
  return {sysadmin::step(state_, resets_of(action, mode_, n_), rng), false};
}

void SysAdminEnv::set_state(State state) {
  if (state.n != n_ || static_cast<int>(state.on.size()) != n_) fail(ErrorCode::validation, "sysadmin: size mismatch");
  for (const auto& [i, j] : state.deps) {
    if (i < 0 || i >= n_ || j < 0 || j >= n_ || i == j) fail(ErrorCode::validation, "sysadmin: invalid dependency");
  }
  state_ = std::move(state);
}

}  // namespace relrl::sysadmin
