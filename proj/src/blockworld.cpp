#include "relrl/blockworld.hpp"

#include "relrl/error.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace relrl::blockworld {

bool is_legal(int n, const std::vector<int>& on) {
  if (n < 1 || static_cast<int>(on.size()) != n) return false;
  std::vector<int> load(n, 0);
  for (int x = 0; x < n; ++x) {
    if (on[x] < 0 || on[x] > n || on[x] == x) return false;
    if (on[x] < n && ++load[on[x]] > 1) return false;
  }
  for (int x = 0; x < n; ++x) {
    int cur = x;
    for (int hops = 0; cur != n; ++hops) {
      if (hops > n) return false;
      cur = on[cur];
    }
  }
  return true;
}

bool is_free(const std::vector<int>& on, int node) {
  return std::find(on.begin(), on.end(), node) == on.end();
}

std::vector<int> random_configuration(int n, std::mt19937_64& rng) {
  if (n < 1) fail(ErrorCode::invalid_argument, "blockworld needs at least one block");
  std::vector<int> remaining(n);
  std::iota(remaining.begin(), remaining.end(), 0);
  std::vector<int> on(n, n);
  while (!remaining.empty()) {
    const int k = std::uniform_int_distribution<int>(1, static_cast<int>(remaining.size()))(rng);
    std::shuffle(remaining.begin(), remaining.end(), rng);
    int below = n;
    for (int i = 0; i < k; ++i) {
      on[remaining[i]] = below;
      below = remaining[i];
    }
    remaining.erase(remaining.begin(), remaining.begin() + k);
  }
  return on;
}

State generate(int n, std::mt19937_64& rng) {
  State s;
  s.n = n;
  s.on = random_configuration(n, rng);
  s.goal_on = random_configuration(n, rng);
  return s;
}

StepOutcome step(State& state, Move move) {
  const int n = state.n;
  if (move.x < 0 || move.x >= n) fail(ErrorCode::illegal_action, "move: x must be a block");
  if (move.y < 0 || move.y > n || move.y == move.x) fail(ErrorCode::illegal_action, "move: invalid destination");
  if (!is_free(state.on, move.x)) fail(ErrorCode::illegal_action, "move: a block lies on x");
  if (move.y != n && !is_free(state.on, move.y)) fail(ErrorCode::illegal_action, "move: a block lies on y");
  state.on[move.x] = move.y;
  StepOutcome out{kStepReward, false};
  if (state.solved()) {
    out.reward += kSolveReward;
    out.terminal = true;
  }
  return out;
}

GraphSignature signature() { return GraphSignature{1, 0, 4, 0}; }

const std::vector<ActionSchema>& schemas() {
  static const std::vector<ActionSchema> s{{"move", ActionKind::parametric, 2, false}};
  return s;
}

StateGraph encode(const State& state) {
  const int n = state.n;
  Matd features = Matd::Zero(n + 1, 1);
  features(n, 0) = 1.0;
  std::vector<int> src, dst, type;
  src.reserve(4 * n);
  dst.reserve(4 * n);
  type.reserve(4 * n);
  auto relation = [&](int x, int y, int above, int below) {
    src.push_back(x);
    dst.push_back(y);
    type.push_back(above);
    src.push_back(y);
    dst.push_back(x);
    type.push_back(below);
  };
  for (int x = 0; x < n; ++x) relation(x, state.on[x], current_above, current_below);
  for (int x = 0; x < n; ++x) relation(x, state.goal_on[x], goal_above, goal_below);
  const Eigen::Index edges = static_cast<Eigen::Index>(src.size());
  return StateGraph::from_arrays(std::move(features), std::move(src), std::move(dst), std::move(type),
                                 Matd(edges, 0), {}, 4);
}

MovePreconditions::MovePreconditions(std::vector<int> on)
    : n_(static_cast<int>(on.size())), on_(std::move(on)), free_(n_ + 1, 1) {
  for (int x = 0; x < n_; ++x) {
    if (on_[x] < n_) free_[on_[x]] = 0;
  }
}

Mask MovePreconditions::parameter_mask(int schema, std::span<const int> chosen) const {
  if (schema != 0) fail(ErrorCode::invalid_argument, "blockworld has a single schema");
  Mask m(n_ + 1, 0);
  if (chosen.empty()) {
    for (int x = 0; x < n_; ++x) m[x] = free_[x];
    return m;
  }
  for (int y = 0; y < n_; ++y) m[y] = free_[y];
  m[n_] = 1;
  m[chosen[0]] = 0;
  return m;
}

Move to_move(const ActionChoice& action) {
  if (action.action_id != 0 || action.params.size() != 2) {
    fail(ErrorCode::illegal_action, "blockworld expects move(x, y)");
  }
  return {action.params[0], action.params[1]};
}

ActionChoice to_action(Move move) {
  ActionChoice a;
  a.action_id = 0;
  a.params = {move.x, move.y};
  return a;
}

namespace {

std::uint64_t pack(const std::vector<int>& on) {
  const std::uint64_t base = on.size() + 1;
  std::uint64_t key = 0;
  for (int v : on) key = key * base + static_cast<std::uint64_t>(v);
  return key;
}

}  // namespace

int optimal_steps(const State& state) {
  const int n = state.n;
  if (n > kOracleMaxBlocks) {
    fail(ErrorCode::unsupported, "optimal_steps supports at most " + std::to_string(kOracleMaxBlocks) + " blocks");
  }
  if (!is_legal(n, state.on) || !is_legal(n, state.goal_on)) fail(ErrorCode::validation, "illegal configuration");
  const std::uint64_t goal = pack(state.goal_on);
  std::unordered_map<std::uint64_t, int> dist;
  std::vector<std::vector<int>> frontier{state.on};
  dist.emplace(pack(state.on), 0);
  if (pack(state.on) == goal) return 0;
  for (int depth = 1; !frontier.empty(); ++depth) {
    std::vector<std::vector<int>> next;
    for (const auto& on : frontier) {
      Mask free(n + 1, 1);
      for (int x = 0; x < n; ++x) {
        if (on[x] < n) free[on[x]] = 0;
      }
      for (int x = 0; x < n; ++x) {
        if (!free[x]) continue;
        for (int y = 0; y <= n; ++y) {
          if (y == x || y == on[x] || (y < n && !free[y])) continue;
          std::vector<int> succ = on;
          succ[x] = y;
          const std::uint64_t key = pack(succ);
          if (!dist.emplace(key, depth).second) continue;
          if (key == goal) return depth;
          next.push_back(std::move(succ));
        }
      }
    }
    frontier = std::move(next);
  }
  fail(ErrorCode::consistency, "goal configuration unreachable");
}

std::uint64_t count_configurations(int n) {
  if (n < 1) fail(ErrorCode::invalid_argument, "count_configurations needs n >= 1");
  using u128 = unsigned __int128;
  const u128 limit = static_cast<u128>(~std::uint64_t{0});
  auto overflow = [] { fail(ErrorCode::invalid_argument, "configuration count exceeds 64 bits"); };
  u128 total = 0;
  for (int i = 1; i <= n; ++i) {
    // C(n, i) * (n-1)!/(i-1)!, built incrementally so every factor stays exact.
    u128 binom = 1;
    for (int k = 1; k <= i; ++k) binom = binom * static_cast<u128>(n - i + k) / static_cast<u128>(k);
    u128 term = binom;
    for (int k = i; k <= n - 1; ++k) {
      term *= static_cast<u128>(k);
      if (term > limit) overflow();
    }
    total += term;
    if (total > limit) overflow();
  }
  return static_cast<std::uint64_t>(total);
}

std::vector<std::vector<int>> enumerate_configurations(int n) {
  if (n < 1 || n > kOracleMaxBlocks) fail(ErrorCode::unsupported, "enumeration supports 1..8 blocks");
  // Insert blocks one at a time into ordered stacks (bottom first): each
  // configuration arises from exactly one insertion sequence.
  std::vector<std::vector<int>> out;
  std::vector<std::vector<int>> stacks;
  auto emit = [&] {
    std::vector<int> on(n, n);
    for (const auto& st : stacks) {
      for (std::size_t k = 1; k < st.size(); ++k) on[st[k]] = st[k - 1];
    }
    out.push_back(std::move(on));
  };
  auto place = [&](auto&& self, int block) -> void {
    if (block == n) {
      emit();
      return;
    }
    stacks.push_back({block});
    self(self, block + 1);
    stacks.pop_back();
    for (std::size_t s = 0; s < stacks.size(); ++s) {
      for (std::size_t pos = 0; pos <= stacks[s].size(); ++pos) {
        stacks[s].insert(stacks[s].begin() + static_cast<std::ptrdiff_t>(pos), block);
        self(self, block + 1);
        stacks[s].erase(stacks[s].begin() + static_cast<std::ptrdiff_t>(pos));
      }
    }
  };
  place(place, 0);
  return out;
}

namespace {

void write_pairs(std::ostringstream& out, const char* label, const std::vector<int>& on) {
  const int n = static_cast<int>(on.size());
  out << label;
  for (int x = 0; x < n; ++x) {
    out << ' ' << x << ':';
    if (on[x] == n) {
      out << 'G';
    } else {
      out << on[x];
    }
  }
  out << '\n';
}

std::vector<int> read_pairs(std::istringstream& in, const std::string& label, int n) {
  std::string line;
  while (std::getline(in, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
  }
  std::istringstream ls(line);
  std::string head;
  ls >> head;
  if (head != label) fail(ErrorCode::parse, "blockworld: expected a '" + label + "' line");
  std::vector<int> on(n, -1);
  std::string tok;
  while (ls >> tok) {
    const auto colon = tok.find(':');
    if (colon == std::string::npos) fail(ErrorCode::parse, "blockworld: expected block:support, got '" + tok + "'");
    int x = 0;
    int y = 0;
    try {
      x = std::stoi(tok.substr(0, colon));
      const std::string sup = tok.substr(colon + 1);
      y = sup == "G" ? n : std::stoi(sup);
    } catch (const std::logic_error&) {
      fail(ErrorCode::parse, "blockworld: malformed pair '" + tok + "'");
    }
    if (x < 0 || x >= n || on[x] != -1) fail(ErrorCode::parse, "blockworld: bad or repeated block in '" + tok + "'");
    on[x] = y;
  }
  if (std::count(on.begin(), on.end(), -1) != 0) fail(ErrorCode::parse, "blockworld: missing blocks on '" + label + "'");
  if (!is_legal(n, on)) fail(ErrorCode::parse, "blockworld: '" + label + "' is not a legal configuration");
  return on;
}

}  // namespace

std::string save(const State& state) {
  std::ostringstream out;
  out << state.n << '\n';
  write_pairs(out, "state", state.on);
  write_pairs(out, "goal", state.goal_on);
  return out.str();
}

State load(const std::string& text) {
  std::istringstream in(text);
  State s;
  if (!(in >> s.n) || s.n < 1) fail(ErrorCode::parse, "blockworld: missing block count");
  s.on = read_pairs(in, "state", s.n);
  s.goal_on = read_pairs(in, "goal", s.n);
  return s;
}

BlockWorldEnv::BlockWorldEnv(int n, bool resample_solved) : n_(n), resample_solved_(resample_solved) {
  if (n < 1) fail(ErrorCode::invalid_argument, "blockworld needs at least one block");
  state_.n = n;
  state_.on.assign(n, n);
  state_.goal_on.assign(n, n);
}

void BlockWorldEnv::reset(std::mt19937_64& rng) {
  // With one block every instance is already solved.
  const int attempts = (resample_solved_ && n_ > 1) ? 1000 : 1;
  for (int i = 0; i < attempts; ++i) {
    state_ = generate(n_, rng);
    if (!state_.solved()) break;
  }
}

std::shared_ptr<const Preconditions> BlockWorldEnv::preconditions() const {
  return std::make_shared<MovePreconditions>(state_.on);
}

StepOutcome BlockWorldEnv::step(const ActionChoice& action, std::mt19937_64&) { return blockworld::step(state_, to_move(action)); }

void BlockWorldEnv::set_state(State state) {
  if (state.n != n_ || !is_legal(n_, state.on) || !is_legal(n_, state.goal_on)) {
    fail(ErrorCode::validation, "blockworld: state does not match this environment");
  }
  state_ = std::move(state);
}

}  // namespace relrl::blockworld
