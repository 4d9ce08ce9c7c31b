#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance runner.

#include "relrl/blockworld.hpp"
#include "relrl/sokoban.hpp"

#include <map>
#include <queue>
#include <set>
#include <vector>

namespace relrl::oracle {

namespace bw {

// Legality written out independently: every block rests on the ground or a
// block, no two blocks share a support block, and following supports from
// any block reaches the ground.
inline bool legal(int n, const std::vector<int>& on) {
  std::vector<int> load(n, 0);
  for (int x = 0; x < n; ++x) {
    if (on[x] == x || on[x] < 0 || on[x] > n) return false;
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

inline std::vector<std::vector<int>> brute_force_configurations(int n) {
  std::vector<std::vector<int>> out;
  std::vector<int> on(n, 0);
  while (true) {
    if (legal(n, on)) out.push_back(on);
    int i = 0;
    while (i < n && ++on[i] > n) on[i++] = 0;
    if (i == n) break;
  }
  return out;
}

inline std::vector<std::vector<int>> successors(const std::vector<int>& on) {
  const int n = static_cast<int>(on.size());
  std::vector<char> covered(n, 0);
  for (int x = 0; x < n; ++x) {
    if (on[x] < n) covered[on[x]] = 1;
  }
  std::vector<std::vector<int>> out;
  for (int x = 0; x < n; ++x) {
    if (covered[x]) continue;
    for (int y = 0; y <= n; ++y) {
      if (y == x || (y < n && covered[y]) || on[x] == y) continue;
      std::vector<int> next = on;
      next[x] = y;
      out.push_back(next);
    }
  }
  return out;
}

inline int bfs_distance(const std::vector<int>& from, const std::vector<int>& to) {
  std::map<std::vector<int>, int> dist{{from, 0}};
  std::queue<std::vector<int>> frontier;
  frontier.push(from);
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop();
    if (cur == to) return dist[cur];
    for (const auto& next : successors(cur)) {
      if (dist.emplace(next, dist[cur] + 1).second) frontier.push(next);
    }
  }
  return -1;
}

inline std::set<std::vector<int>> reachable(int n) {
  std::set<std::vector<int>> seen{std::vector<int>(n, n)};
  std::queue<std::vector<int>> frontier;
  frontier.push(std::vector<int>(n, n));
  while (!frontier.empty()) {
    const auto cur = frontier.front();
    frontier.pop();
    for (const auto& next : successors(cur)) {
      if (seen.insert(next).second) frontier.push(next);
    }
  }
  return seen;
}

}  // namespace bw

namespace sok {

using namespace relrl::sokoban;

inline int step_cell(const State& s, int cell, int dr, int dc) {
  const int r = cell / s.cols + dr;
  const int c = cell % s.cols + dc;
  if (r < 0 || c < 0 || r >= s.rows || c >= s.cols) return -1;
  return r * s.cols + c;
}

constexpr int kDr[4] = {0, 0, -1, 1};
constexpr int kDc[4] = {-1, 1, 0, 0};

// Walk distance with boxes as obstacles, -1 when unreachable.
inline int walk_distance(const State& s, int to) {
  std::map<int, int> dist{{s.player, 0}};
  std::queue<int> q;
  q.push(s.player);
  while (!q.empty()) {
    const int cur = q.front();
    q.pop();
    if (cur == to) return dist[cur];
    for (int d = 0; d < 4; ++d) {
      const int nb = step_cell(s, cur, kDr[d], kDc[d]);
      if (nb < 0 || s.wall[nb] || s.box[nb] || dist.count(nb)) continue;
      dist[nb] = dist[cur] + 1;
      q.push(nb);
    }
  }
  return -1;
}

// Expected result of a macro computed directly from the rules of the game.
struct Expected {
  State state;
  double reward = 0.0;
  bool terminal = false;
};

inline Expected expected_macro(const State& s, MacroAction a) {
  Expected e{s, kStepReward, s.solved()};
  const auto noop = [&] {
    if (e.terminal) e.reward += kSolveReward;
    return e;
  };
  if (a.kind == MacroKind::move_to) {
    const int d = walk_distance(s, a.target);
    if (d <= 0 || s.wall[a.target] || s.box[a.target]) return noop();
    e.state.player = a.target;
    e.reward = kStepReward * d + (e.state.solved() ? kSolveReward : 0.0);
    e.terminal = e.state.solved();
    return e;
  }
  const int dir = static_cast<int>(a.kind) - 1;
  if (!s.box[a.target]) return noop();
  const int ahead = step_cell(s, a.target, kDr[dir], kDc[dir]);
  const int behind = step_cell(s, a.target, -kDr[dir], -kDc[dir]);
  if (ahead < 0 || behind < 0 || s.wall[ahead] || s.box[ahead]) return noop();
  const int d = walk_distance(s, behind);
  if (d < 0) return noop();
  e.state.player = a.target;
  e.state.box[a.target] = 0;
  e.state.box[ahead] = 1;
  e.reward = kStepReward * (d + 1) + kBoxOnGoalReward * (s.goal[ahead] - s.goal[a.target]);
  e.terminal = e.state.solved();
  if (e.terminal) e.reward += kSolveReward;
  return e;
}

// Breadth-first search over (player, boxes) with elementary moves.
inline bool solvable(const State& start, int max_states = 2'000'000) {
  std::set<std::pair<int, std::vector<char>>> seen{{start.player, start.box}};
  std::queue<State> q;
  q.push(start);
  while (!q.empty() && static_cast<int>(seen.size()) < max_states) {
    const State cur = q.front();
    q.pop();
    if (cur.solved()) return true;
    for (Dir d : {Dir::left, Dir::right, Dir::up, Dir::down}) {
      State next = cur;
      elementary_step(next, d);
      if (seen.insert({next.player, next.box}).second) q.push(next);
    }
  }
  return false;
}

}  // namespace sok

}  // namespace relrl::oracle
