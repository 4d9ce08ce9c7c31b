#include "relrl/blockworld.hpp"
#include "relrl/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace relrl;
using namespace relrl::blockworld;
using namespace relrl::oracle::bw;

TEST_SUITE("blockworld") {
  TEST_CASE("configuration counts") {
    CHECK(count_configurations(1) == 1);
    CHECK(count_configurations(2) == 3);
    CHECK(count_configurations(3) == 13);
    CHECK(count_configurations(5) == 501);
    for (int n = 1; n <= 6; ++n) {
      auto brute = brute_force_configurations(n);
      std::sort(brute.begin(), brute.end());
      CHECK(brute.size() == count_configurations(n));
      CHECK(reachable(n).size() == count_configurations(n));
      auto listed = enumerate_configurations(n);
      std::sort(listed.begin(), listed.end());
      CHECK(listed == brute);
    }
    CHECK_THROWS_AS(count_configurations(40), Error);
  }

  TEST_CASE("legality matches the independent check") {
    for (const auto& on : brute_force_configurations(4)) CHECK(is_legal(4, on));
    CHECK_FALSE(is_legal(3, {1, 0, 3}));
    CHECK_FALSE(is_legal(3, {2, 2, 3}));
    CHECK_FALSE(is_legal(3, {0, 3, 3}));
  }

  TEST_CASE("random configurations are legal and cover the space") {
    std::mt19937_64 rng(1);
    std::set<std::vector<int>> seen;
    for (int i = 0; i < 3000; ++i) {
      const auto on = random_configuration(3, rng);
      REQUIRE(legal(3, on));
      seen.insert(on);
    }
    CHECK(seen.size() == 13);
  }

  TEST_CASE("optimal steps agree with breadth-first search") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 40; ++i) {
      const int n = 2 + i % 4;
      const State s = generate(n, rng);
      CHECK(optimal_steps(s) == bfs_distance(s.on, s.goal_on));
    }
    State big;
    big.n = kOracleMaxBlocks + 1;
    big.on.assign(big.n, big.n);
    big.goal_on = big.on;
    CHECK_THROWS_AS(optimal_steps(big), Error);
  }

  TEST_CASE("moves, rewards and preconditions") {
    State s;
    s.n = 3;
    s.on = {3, 0, 3};
    s.goal_on = {3, 3, 3};
    CHECK_THROWS_AS(step(s, Move{0, 2}), Error);  // 0 is covered
    CHECK_THROWS_AS(step(s, Move{2, 0}), Error);  // 0 is covered
    CHECK_THROWS_AS(step(s, Move{2, 2}), Error);
    const StepOutcome last = step(s, Move{1, 3});
    CHECK(last.terminal);
    CHECK(last.reward == doctest::Approx(kStepReward + kSolveReward));
    s.goal_on = {2, 3, 3};
    const StepOutcome mid = step(s, Move{1, 0});
    CHECK_FALSE(mid.terminal);
    CHECK(mid.reward == doctest::Approx(kStepReward));

    const MovePreconditions pre({3, 0, 3});
    const std::vector<int> none;
    CHECK(pre.parameter_mask(0, none) == Mask{0, 1, 1, 0});
    const std::vector<int> x1{1};
    CHECK(pre.parameter_mask(0, x1) == Mask{0, 0, 1, 1});
    const auto actions = enumerate_actions(pre, schemas());
    CHECK(actions.size() == 4);
    for (const auto& a : actions) {
      State copy;
      copy.n = 3;
      copy.on = {3, 0, 3};
      copy.goal_on = {1, 2, 3};
      CHECK_NOTHROW(step(copy, to_move(a)));
    }
  }

  TEST_CASE("enumerated actions are exactly the legal moves") {
    for (int n = 2; n <= 4; ++n) {
      for (const auto& on : brute_force_configurations(n)) {
        const MovePreconditions pre(on);
        std::set<std::vector<int>> via_actions;
        for (const auto& a : enumerate_actions(pre, schemas())) {
          std::vector<int> next = on;
          const Move m = to_move(a);
          next[m.x] = m.y;
          via_actions.insert(next);
        }
        // Moving a block onto its current support is allowed by the
        // preconditions and leaves the state unchanged.
        std::set<std::vector<int>> expected;
        for (const auto& next : successors(on)) expected.insert(next);
        via_actions.erase(on);
        CHECK(via_actions == expected);
      }
    }
  }

  TEST_CASE("encoding") {
    State s;
    s.n = 3;
    s.on = {3, 0, 3};
    s.goal_on = {1, 2, 3};
    const StateGraph g = encode(s);
    CHECK(g.node_count() == 4);
    CHECK(g.edge_count() == 12);
    CHECK(g.node_features()(3, 0) == 1.0);
    CHECK(g.node_features()(0, 0) == 0.0);
    int above_ground = 0;
    for (int e = 0; e < g.edge_count(); ++e) {
      if (g.type()[e] == current_above && g.dst()[e] == 3) ++above_ground;
    }
    CHECK(above_ground == 2);
    CHECK(g.signature() == signature());
  }

  TEST_CASE("save and load round trip") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
      const State s = generate(1 + i % 7, rng);
      CHECK(load(save(s)) == s);
    }
    CHECK_THROWS_AS(load("3\nstate 0:1 1:0 2:G\ngoal 0:G 1:G 2:G\n"), Error);
    CHECK_THROWS_AS(load("garbage"), Error);
  }

  TEST_CASE("environment resets to unsolved instances") {
    BlockWorldEnv env(2);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 200; ++i) {
      env.reset(rng);
      CHECK_FALSE(env.solved());
    }
  }
}
