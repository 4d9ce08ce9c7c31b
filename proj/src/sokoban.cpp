#include "relrl/sokoban.hpp"

#include "relrl/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace relrl::sokoban {

bool State::solved() const {
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (box[i] != goal[i]) return false;
  }
  return true;
}

int State::boxes_on_goals() const {
  int n = 0;
  for (std::size_t i = 0; i < box.size(); ++i) n += (box[i] && goal[i]) ? 1 : 0;
  return n;
}

void validate(const State& s) {
  const std::size_t cells = static_cast<std::size_t>(s.rows) * static_cast<std::size_t>(s.cols);
  if (s.rows < 1 || s.cols < 1 || s.wall.size() != cells || s.goal.size() != cells || s.box.size() != cells) {
    fail(ErrorCode::validation, "sokoban: layer sizes differ from the grid");
  }
  if (s.player < 0 || s.player >= static_cast<int>(cells)) fail(ErrorCode::validation, "sokoban: player off the grid");
  if (s.wall[s.player] || s.box[s.player]) fail(ErrorCode::validation, "sokoban: player overlaps a wall or box");
  int boxes = 0;
  int goals = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    if (s.wall[i] && (s.box[i] || s.goal[i])) fail(ErrorCode::validation, "sokoban: box or goal inside a wall");
    boxes += s.box[i] ? 1 : 0;
    goals += s.goal[i] ? 1 : 0;
  }
  if (boxes != goals) fail(ErrorCode::validation, "sokoban: box and goal counts differ");
}

int neighbour(const State& s, int cell, Dir d) {
  const int r = cell / s.cols;
  const int c = cell % s.cols;
  switch (d) {
    case Dir::left:
      return c > 0 ? cell - 1 : -1;
    case Dir::right:
      return c + 1 < s.cols ? cell + 1 : -1;
    case Dir::up:
      return r > 0 ? cell - s.cols : -1;
    case Dir::down:
      return r + 1 < s.rows ? cell + s.cols : -1;
    case Dir::noop:
      return cell;
  }
  return -1;
}

Dir opposite(Dir d) {
  switch (d) {
    case Dir::left:
      return Dir::right;
    case Dir::right:
      return Dir::left;
    case Dir::up:
      return Dir::down;
    case Dir::down:
      return Dir::up;
    case Dir::noop:
      return Dir::noop;
  }
  return Dir::noop;
}

StepOutcome elementary_step(State& s, Dir d) {
  StepOutcome out{kStepReward, false};
  if (d != Dir::noop) {
    const int next = neighbour(s, s.player, d);
    if (next >= 0 && !s.wall[next]) {
      if (!s.box[next]) {
        s.player = next;
      } else {
        const int ahead = neighbour(s, next, d);
        if (ahead >= 0 && !s.wall[ahead] && !s.box[ahead]) {
          s.box[next] = 0;
          s.box[ahead] = 1;
          out.reward += kBoxOnGoalReward * (static_cast<int>(s.goal[ahead]) - static_cast<int>(s.goal[next]));
          s.player = next;
        }
      }
    }
  }
  if (s.solved()) {
    out.reward += kSolveReward;
    out.terminal = true;
  }
  return out;
}

std::optional<std::vector<Dir>> plan_move_to(const State& s, int cell) {
  const int cells = s.rows * s.cols;
  if (cell < 0 || cell >= cells || s.wall[cell] || s.box[cell]) return std::nullopt;
  std::vector<int> parent(cells, -1);
  std::vector<Dir> via(cells, Dir::noop);
  std::vector<char> seen(cells, 0);
  std::deque<int> queue{s.player};
  seen[s.player] = 1;
  while (!queue.empty() && !seen[cell]) {
    const int cur = queue.front();
    queue.pop_front();
    for (Dir d : {Dir::left, Dir::right, Dir::up, Dir::down}) {
      const int nb = neighbour(s, cur, d);
      if (nb < 0 || seen[nb] || s.wall[nb] || s.box[nb]) continue;
      seen[nb] = 1;
      parent[nb] = cur;
      via[nb] = d;
      queue.push_back(nb);
    }
  }
  if (!seen[cell]) return std::nullopt;
  std::vector<Dir> path;
  for (int cur = cell; cur != s.player; cur = parent[cur]) path.push_back(via[cur]);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<Dir> macro_plan(const State& s, MacroAction a) {
  const std::vector<Dir> noop{Dir::noop};
  const int cells = s.rows * s.cols;
  if (a.target < 0 || a.target >= cells) return noop;
  if (a.kind == MacroKind::move_to) {
    auto plan = plan_move_to(s, a.target);
    if (!plan || plan->empty()) return noop;
    return *plan;
  }
  const Dir d = static_cast<Dir>(static_cast<int>(a.kind) - 1);
  if (!s.box[a.target]) return noop;
  const int ahead = neighbour(s, a.target, d);
  if (ahead < 0 || s.wall[ahead] || s.box[ahead]) return noop;
  const int behind = neighbour(s, a.target, opposite(d));
  if (behind < 0) return noop;
  auto plan = plan_move_to(s, behind);
  if (!plan) return noop;
  plan->push_back(d);
  return *plan;
}

MacroOutcome macro_step(State& s, MacroAction a) {
  MacroOutcome out;
  for (Dir d : macro_plan(s, a)) {
    const StepOutcome r = elementary_step(s, d);
    out.reward += r.reward;
    ++out.elementary_count;
    if (r.terminal) {
      out.terminal = true;
      break;
    }
  }
  return out;
}

std::vector<int> walkable_cells(const State& s) {
  std::vector<int> out;
  for (int i = 0; i < s.rows * s.cols; ++i) {
    if (!s.wall[i]) out.push_back(i);
  }
  return out;
}

GraphSignature signature() { return GraphSignature{3, 0, 4, 0}; }

const std::vector<ActionSchema>& schemas() {
  static const std::vector<ActionSchema> s{
      {"move_to", ActionKind::parametric, 1, false},    {"push_left", ActionKind::parametric, 1, false},
      {"push_right", ActionKind::parametric, 1, false}, {"push_up", ActionKind::parametric, 1, false},
      {"push_down", ActionKind::parametric, 1, false},
  };
  return s;
}

StateGraph encode(const State& s) {
  const std::vector<int> cells = walkable_cells(s);
  std::vector<int> node_of(static_cast<std::size_t>(s.rows * s.cols), -1);
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) node_of[cells[i]] = i;
  Matd features(static_cast<Eigen::Index>(cells.size()), 3);
  std::vector<int> src, dst, type;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    const int c = cells[i];
    features(i, 0) = s.goal[c];
    features(i, 1) = s.box[c];
    features(i, 2) = s.player == c ? 1.0 : 0.0;
    for (Dir d : {Dir::left, Dir::right, Dir::up, Dir::down}) {
      const int nb = neighbour(s, c, d);
      if (nb < 0 || s.wall[nb]) continue;
      src.push_back(i);
      dst.push_back(node_of[nb]);
      type.push_back(static_cast<int>(d));
    }
  }
  const Eigen::Index edges = static_cast<Eigen::Index>(src.size());
  return StateGraph::from_arrays(std::move(features), std::move(src), std::move(dst), std::move(type),
                                 Matd(edges, 0), {}, 4);
}

State load_level(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    lines.push_back(line);
  }
  if (lines.empty()) fail(ErrorCode::parse, "sokoban: empty level");
  State s;
  s.rows = static_cast<int>(lines.size());
  s.cols = static_cast<int>(lines.front().size());
  const std::size_t cells = static_cast<std::size_t>(s.rows) * static_cast<std::size_t>(s.cols);
  s.wall.assign(cells, 0);
  s.goal.assign(cells, 0);
  s.box.assign(cells, 0);
  int players = 0;
  for (int r = 0; r < s.rows; ++r) {
    if (static_cast<int>(lines[r].size()) != s.cols) fail(ErrorCode::parse, "sokoban: level is not rectangular");
    for (int c = 0; c < s.cols; ++c) {
      const int i = s.cell(r, c);
      switch (lines[r][c]) {
        case '#':
          s.wall[i] = 1;
          break;
        case '@':
          s.player = i;
          ++players;
          break;
        case '+':
          s.player = i;
          s.goal[i] = 1;
          ++players;
          break;
        case '$':
          s.box[i] = 1;
          break;
        case '*':
          s.box[i] = 1;
          s.goal[i] = 1;
          break;
        case '.':
          s.goal[i] = 1;
          break;
        case ' ':
          break;
        default:
          fail(ErrorCode::parse, std::string("sokoban: unexpected character '") + lines[r][c] + "'");
      }
    }
  }
  if (players != 1) fail(ErrorCode::parse, "sokoban: level needs exactly one player");
  try {
    validate(s);
  } catch (const Error& e) {
    fail(ErrorCode::parse, e.what());
  }
  return s;
}

std::string save_level(const State& s) {
  std::string out;
  for (int r = 0; r < s.rows; ++r) {
    for (int c = 0; c < s.cols; ++c) {
      const int i = s.cell(r, c);
      char ch = ' ';
      if (s.wall[i]) {
        ch = '#';
      } else if (s.player == i) {
        ch = s.goal[i] ? '+' : '@';
      } else if (s.box[i]) {
        ch = s.goal[i] ? '*' : '$';
      } else if (s.goal[i]) {
        ch = '.';
      }
      out += ch;
    }
    out += '\n';
  }
  return out;
}

std::vector<State> load_levels(const std::string& text) {
  std::vector<State> out;
  std::istringstream in(text);
  std::string line;
  std::string block;
  auto flush = [&] {
    if (block.find_first_not_of(" \n") != std::string::npos) out.push_back(load_level(block));
    block.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line.front() == ';') {
      flush();
      continue;
    }
    if (line.empty()) {
      flush();
      continue;
    }
    block += line + '\n';
  }
  flush();
  return out;
}

namespace {

constexpr int kMinPulls = 5;
constexpr int kGenerationAttempts = 500;

bool carve_room(State& s, int floor_target, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> row(1, s.rows - 2);
  std::uniform_int_distribution<int> col(1, s.cols - 2);
  std::uniform_int_distribution<int> dir(0, 3);
  int cur = s.cell(row(rng), col(rng));
  s.wall[cur] = 0;
  int floor = 1;
  const int budget = 100 * s.rows * s.cols;
  for (int i = 0; i < budget && floor < floor_target; ++i) {
    const int nb = neighbour(s, cur, static_cast<Dir>(dir(rng)));
    const int r = nb / s.cols;
    const int c = nb % s.cols;
    if (nb < 0 || r < 1 || c < 1 || r > s.rows - 2 || c > s.cols - 2) continue;
    cur = nb;
    if (s.wall[cur]) {
      s.wall[cur] = 0;
      ++floor;
    }
  }
  return floor >= floor_target;
}

}  // namespace

State generate_level(int width, int height, int num_boxes, std::mt19937_64& rng) {
  if (width < 3 || height < 3 || num_boxes < 1) fail(ErrorCode::invalid_argument, "sokoban: grid too small");
  const int interior = (width - 2) * (height - 2);
  if (interior < num_boxes + 2) fail(ErrorCode::invalid_argument, "sokoban: grid too small for the boxes");
  // A pull needs three floor cells in a line.
  if (std::max(width, height) < 5) fail(ErrorCode::invalid_argument, "sokoban: grid too small to pull boxes");
  // Small rooms need most of their interior open to leave space for pulls.
  const double floor_fraction = interior < 36 ? 0.85 : 0.6;
  const int floor_target = std::max(num_boxes + 2, static_cast<int>(std::lround(floor_fraction * interior)));
  const int min_pulls = interior < 16 ? 1 : kMinPulls;
  const int hw = width * height;
  std::uniform_int_distribution<int> walk_length(hw / 2, 2 * hw);
  std::uniform_int_distribution<int> dir(0, 3);
  std::bernoulli_distribution pull_bias(0.8);
  for (int attempt = 0; attempt < kGenerationAttempts; ++attempt) {
    State s;
    s.rows = height;
    s.cols = width;
    s.wall.assign(static_cast<std::size_t>(hw), 1);
    s.goal.assign(static_cast<std::size_t>(hw), 0);
    s.box.assign(static_cast<std::size_t>(hw), 0);
    if (!carve_room(s, floor_target, rng)) continue;
    std::vector<int> floor = walkable_cells(s);
    std::shuffle(floor.begin(), floor.end(), rng);
    for (int k = 0; k < num_boxes; ++k) {
      s.goal[floor[k]] = 1;
      s.box[floor[k]] = 1;
    }
    s.player = floor[num_boxes];
    int pulls = 0;
    const int steps = walk_length(rng);
    for (int t = 0; t < steps; ++t) {
      Dir d = static_cast<Dir>(dir(rng));
      if (pull_bias(rng)) {
        // Prefer stepping away from an adjacent box, which pulls it along.
        for (Dir away : {Dir::left, Dir::right, Dir::up, Dir::down}) {
          const int from = neighbour(s, s.player, opposite(away));
          const int to = neighbour(s, s.player, away);
          if (from >= 0 && s.box[from] && to >= 0 && !s.wall[to] && !s.box[to]) {
            d = away;
            break;
          }
        }
      }
      const int next = neighbour(s, s.player, d);
      if (next < 0 || s.wall[next] || s.box[next]) continue;
      const int behind = neighbour(s, s.player, opposite(d));
      const bool pull = behind >= 0 && s.box[behind];
      if (pull) {
        s.box[behind] = 0;
        s.box[s.player] = 1;
        ++pulls;
      }
      s.player = next;
    }
    if (pulls >= min_pulls && !s.solved()) return s;
  }
  fail(ErrorCode::generation, "sokoban: level generation budget exhausted");
}

SokobanEnv::SokobanEnv(int width, int height, int num_boxes) : width_(width), height_(height), boxes_(num_boxes) {
  if (width < 3 || height < 3 || num_boxes < 1) fail(ErrorCode::invalid_argument, "sokoban: grid too small");
  state_ = load_level("###\n#@#\n###\n");
}

SokobanEnv::SokobanEnv(std::vector<State> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) fail(ErrorCode::invalid_argument, "sokoban: empty level list");
  for (const State& s : levels_) validate(s);
  set_state(levels_.front());
}

void SokobanEnv::reset(std::mt19937_64& rng) {
  if (levels_.empty()) {
    set_state(generate_level(width_, height_, boxes_, rng));
  } else {
    const auto k = std::uniform_int_distribution<std::size_t>(0, levels_.size() - 1)(rng);
    set_state(levels_[k]);
  }
}

void SokobanEnv::set_state(State state) {
  validate(state);
  state_ = std::move(state);
  cells_ = walkable_cells(state_);
}

std::shared_ptr<const Preconditions> SokobanEnv::preconditions() const {
  return std::make_shared<Unconstrained>(static_cast<int>(cells_.size()), static_cast<int>(schemas().size()));
}

MacroAction SokobanEnv::to_macro(const ActionChoice& action) const {
  if (action.action_id < 0 || action.action_id >= static_cast<int>(schemas().size()) || action.params.size() != 1) {
    fail(ErrorCode::illegal_action, "sokoban expects one of the five macro actions with one node");
  }
  const int node = action.params[0];
  if (node < 0 || node >= static_cast<int>(cells_.size())) fail(ErrorCode::illegal_action, "sokoban: node out of range");
  return MacroAction{static_cast<MacroKind>(action.action_id), cells_[node]};
}

StepOutcome SokobanEnv::step(const ActionChoice& action, std::mt19937_64&) {
  const MacroOutcome m = macro_step(state_, to_macro(action));
  last_elementary_ = m.elementary_count;
  return {m.reward, m.terminal};
}

}  // namespace relrl::sokoban
