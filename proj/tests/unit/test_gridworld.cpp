#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "../helpers.hpp"
#include "cautious/gridworld.hpp"

using namespace cautious;

namespace {

DrivingState make_state(std::size_t column, std::size_t speed,
                        std::optional<Obstacle> left = std::nullopt,
                        std::optional<Obstacle> right = std::nullopt) {
  DrivingState state;
  state.car_column = column;
  state.speed = speed;
  state.left = left;
  state.right = right;
  return state;
}

bool same_state(const DrivingState& a, const DrivingState& b) {
  auto same_obstacle = [](const std::optional<Obstacle>& x, const std::optional<Obstacle>& y) {
    if (x.has_value() != y.has_value()) return false;
    return !x || (x->row == y->row && x->column == y->column);
  };
  return a.car_column == b.car_column && a.speed == b.speed &&
         same_obstacle(a.left, b.left) && same_obstacle(a.right, b.right);
}

double branch_probability(const std::vector<DriveBranch>& branches, const DrivingState& next) {
  for (const auto& branch : branches) {
    if (same_state(branch.next, next)) return branch.probability;
  }
  return -1.0;  // absent
}

double total_probability(const std::vector<DriveBranch>& branches) {
  double sum = 0.0;
  for (const auto& branch : branches) sum += branch.probability;
  return sum;
}

}  // namespace

TEST_SUITE("gridworld") {

TEST_CASE("state space sizes") {
  CHECK(enumerate_states(familiar_grid()).size() == 144);
  CHECK(enumerate_states(novel_grid()).size() == 400);

  GridConfig shallow = familiar_grid();
  shallow.vision_rows = 1;
  CHECK(enumerate_states(shallow).size() == 48);
}

TEST_CASE("state indexing round-trips the enumeration") {
  for (const GridConfig& config : {familiar_grid(), novel_grid()}) {
    const auto states = enumerate_states(config);
    for (std::size_t i = 0; i < states.size(); ++i) {
      CHECK(state_index(config, states[i]) == i);
    }
  }

  // Spot-check the lexicographic layout of the familiar grid: blocks of
  // (speeds x 3 left codes x 3 right codes) per column.
  const GridConfig config = familiar_grid();
  const auto states = enumerate_states(config);
  CHECK(same_state(states[0], make_state(0, 0)));
  const DrivingState probe = make_state(1, 2, std::nullopt, Obstacle{0, 3});
  CHECK(state_index(config, probe) == 55);
  CHECK(same_state(states[55], probe));
}

TEST_CASE("state_index rejects malformed states") {
  const GridConfig config = familiar_grid();
  CHECK_THROWS_AS(state_index(config, make_state(4, 1)), std::invalid_argument);
  CHECK_THROWS_AS(state_index(config, make_state(1, 4)), std::invalid_argument);
  // Obstacle on the road is only legal in the novel variant.
  CHECK_THROWS_AS(state_index(config, make_state(1, 1, Obstacle{0, 1})),
                  std::invalid_argument);
  CHECK_NOTHROW(state_index(novel_grid(), make_state(1, 1, Obstacle{0, 1})));
  // Wrong-half placements are rejected everywhere.
  CHECK_THROWS_AS(state_index(novel_grid(), make_state(1, 1, Obstacle{0, 2})),
                  std::invalid_argument);
  CHECK_THROWS_AS(state_index(config, make_state(1, 1, std::nullopt, Obstacle{2, 3})),
                  std::invalid_argument);
}

TEST_CASE("cruise on open road spawns into both halves") {
  const GridConfig config = familiar_grid();  // q = 0.5, vision 2
  const auto branches = successors(config, make_state(1, 2), DriveAction::kCruise);

  REQUIRE(branches.size() == 9);  // {row0, row1, none} per half
  CHECK(total_probability(branches) == doctest::Approx(1.0).epsilon(1e-15));
  for (const auto& branch : branches) {
    CHECK(branch.reward == 2.0);  // two road spaces
    CHECK_FALSE(branch.collision);
    CHECK(branch.next.speed == 2);
    CHECK(branch.next.car_column == 1);
  }

  // First revealed row is the nearest one: spawn lands at row 0 with
  // probability q, row 1 with (1-q) q, nothing with (1-q)^2.
  CHECK(branch_probability(branches, make_state(1, 2, Obstacle{0, 0}, std::nullopt)) ==
        doctest::Approx(0.5 * 0.25).epsilon(1e-15));
  CHECK(branch_probability(branches, make_state(1, 2, Obstacle{1, 0}, std::nullopt)) ==
        doctest::Approx(0.25 * 0.25).epsilon(1e-15));
  CHECK(branch_probability(branches, make_state(1, 2)) ==
        doctest::Approx(0.25 * 0.25).epsilon(1e-15));
  CHECK(branch_probability(branches, make_state(1, 2, Obstacle{0, 0}, Obstacle{0, 3})) ==
        doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("single-space travel reveals only the top row") {
  const GridConfig config = familiar_grid();
  const auto branches = successors(config, make_state(0, 1), DriveAction::kCruise);
  REQUIRE(branches.size() == 4);
  for (const auto& branch : branches) {
    CHECK(branch.reward == -1.0);  // one space in the ditch: +1 - 2
    CHECK_FALSE(branch.collision);
    if (branch.next.left) CHECK(branch.next.left->row == 1);
    if (branch.next.right) CHECK(branch.next.right->row == 1);
  }
  CHECK(branch_probability(branches, make_state(0, 1, Obstacle{1, 0}, Obstacle{1, 3})) ==
        doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("surviving obstacles scroll down and block their half's spawns") {
  const GridConfig config = familiar_grid();
  const auto branches =
      successors(config, make_state(1, 1, Obstacle{1, 0}), DriveAction::kCruise);
  REQUIRE(branches.size() == 2);
  for (const auto& branch : branches) {
    REQUIRE(branch.next.left.has_value());
    CHECK(branch.next.left->row == 0);  // scrolled from row 1 to row 0
    CHECK(branch.next.left->column == 0);
    CHECK(branch.reward == 1.0);
  }
  CHECK(branch_probability(branches, make_state(1, 1, Obstacle{0, 0}, Obstacle{1, 3})) ==
        doctest::Approx(0.5).epsilon(1e-15));
  CHECK(branch_probability(branches, make_state(1, 1, Obstacle{0, 0})) ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("collisions hit the post-move column and cost twice the speed") {
  const GridConfig config = novel_grid();

  SUBCASE("cruising into a road obstacle") {
    const auto branches =
        successors(config, make_state(1, 2, Obstacle{0, 1}), DriveAction::kCruise);
    REQUIRE(branches.size() == 25);  // both halves respawn over 2 rows x 2 columns
    CHECK(total_probability(branches) == doctest::Approx(1.0).epsilon(1e-14));
    for (const auto& branch : branches) {
      CHECK(branch.collision);
      CHECK(branch.reward == -2.0);  // +2 travel - 2*2 collision
    }
    CHECK(collision_on(config, make_state(1, 2, Obstacle{0, 1}), DriveAction::kCruise));
  }

  SUBCASE("the same obstacle one lane over passes harmlessly") {
    const auto branches =
        successors(config, make_state(1, 2, Obstacle{0, 0}), DriveAction::kCruise);
    for (const auto& branch : branches) {
      CHECK_FALSE(branch.collision);
      CHECK(branch.reward == 2.0);
    }
  }

  SUBCASE("changing lanes into an obstacle collides") {
    const DrivingState state = make_state(1, 3, std::nullopt, Obstacle{1, 2});
    const auto into = successors(config, state, DriveAction::kRight);
    for (const auto& branch : into) {
      CHECK(branch.collision);
      CHECK(branch.reward == -4.0);  // 2 spaces - 2*3
      CHECK(branch.next.car_column == 2);
      CHECK(branch.next.speed == 3);
    }
    // Staying put, the obstacle scrolls past the neighboring lane instead.
    const auto past = successors(config, state, DriveAction::kCruise);
    for (const auto& branch : past) {
      CHECK_FALSE(branch.collision);
      CHECK(branch.reward == 3.0);
    }
  }

  SUBCASE("ditch collision stacks with the ditch penalty") {
    const GridConfig familiar = familiar_grid();
    const auto branches =
        successors(familiar, make_state(0, 2, Obstacle{0, 0}), DriveAction::kCruise);
    for (const auto& branch : branches) {
      CHECK(branch.collision);
      CHECK(branch.reward == -6.0);  // +2 - 4 ditch - 4 collision
    }
  }
}

TEST_CASE("speed changes apply from the next step") {
  const GridConfig config = familiar_grid();

  const auto accel = successors(config, make_state(1, 1), DriveAction::kAccelerate);
  for (const auto& branch : accel) {
    CHECK(branch.reward == 1.0);  // travels at the old speed
    CHECK(branch.next.speed == 2);
  }

  const auto brake = successors(config, make_state(1, 1), DriveAction::kBrake);
  for (const auto& branch : brake) {
    CHECK(branch.reward == 1.0);
    CHECK(branch.next.speed == 0);
  }

  // Saturation at both ends.
  const auto top = successors(config, make_state(1, 3), DriveAction::kAccelerate);
  for (const auto& branch : top) CHECK(branch.next.speed == 3);
  const auto stopped = successors(config, make_state(1, 0), DriveAction::kBrake);
  REQUIRE(stopped.size() == 1);
  CHECK(stopped.front().next.speed == 0);
  CHECK(stopped.front().reward == 0.0);
  CHECK(stopped.front().probability == 1.0);
}

TEST_CASE("lane changes trade one space of travel") {
  const GridConfig config = familiar_grid();

  SUBCASE("at speed 1 the shift costs all forward progress") {
    const auto branches = successors(config, make_state(1, 1), DriveAction::kLeft);
    REQUIRE(branches.size() == 1);  // no travel, no new rows, no spawns
    CHECK(branches.front().next.car_column == 0);
    CHECK(branches.front().next.speed == 1);
    CHECK(branches.front().reward == 0.0);  // zero spaces: even the ditch is free
    CHECK(forward_distance(make_state(1, 1), DriveAction::kLeft) == 0);
  }

  SUBCASE("at speed 0 the maneuver fails entirely") {
    const auto branches = successors(config, make_state(1, 0), DriveAction::kRight);
    REQUIRE(branches.size() == 1);
    CHECK(branches.front().next.car_column == 1);  // no shift at all
    CHECK(branches.front().reward == 0.0);
  }

  SUBCASE("at speed 3 the car still covers two spaces") {
    const auto branches = successors(config, make_state(2, 3), DriveAction::kRight);
    for (const auto& branch : branches) {
      CHECK(branch.next.car_column == 3);
      CHECK(branch.reward == doctest::Approx(2.0 - 4.0));  // two ditch spaces
      CHECK(branch.next.speed == 3);
    }
    CHECK(forward_distance(make_state(2, 3), DriveAction::kRight) == 2);
  }

  SUBCASE("edge columns clamp") {
    const auto left_wall = successors(config, make_state(0, 2), DriveAction::kLeft);
    for (const auto& branch : left_wall) CHECK(branch.next.car_column == 0);
    const auto right_wall = successors(config, make_state(3, 2), DriveAction::kRight);
    for (const auto& branch : right_wall) CHECK(branch.next.car_column == 3);
  }
}

TEST_CASE("familiar traffic never collides on the road") {
  const GridConfig config = familiar_grid();
  for (const auto& state : enumerate_states(config)) {
    for (std::size_t a = 0; a < kDriveActionCount; ++a) {
      const auto action = static_cast<DriveAction>(a);
      if (collision_on(config, state, action)) {
        // Collisions exist (the car can drive down a ditch), but only there.
        const auto branches = successors(config, state, action);
        CHECK(is_ditch_column(branches.front().next.car_column));
      }
    }
  }

  bool found_road_collision = false;
  const GridConfig novel = novel_grid();
  for (const auto& state : enumerate_states(novel)) {
    for (std::size_t a = 0; a < kDriveActionCount; ++a) {
      const auto action = static_cast<DriveAction>(a);
      if (!collision_on(novel, state, action)) continue;
      const auto branches = successors(novel, state, action);
      if (!is_ditch_column(branches.front().next.car_column)) found_road_collision = true;
    }
  }
  CHECK(found_road_collision);
}

TEST_CASE("collision_on and the branch flags agree everywhere") {
  const GridConfig config = novel_grid();
  for (const auto& state : enumerate_states(config)) {
    for (std::size_t a = 0; a < kDriveActionCount; ++a) {
      const auto action = static_cast<DriveAction>(a);
      const auto branches = successors(config, state, action);
      const bool expected = collision_on(config, state, action);
      for (const auto& branch : branches) {
        CHECK(branch.collision == expected);
        CHECK(branch.reward == branches.front().reward);
      }
      CHECK(total_probability(branches) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("tabular export is a valid MDP with the expected starts") {
  for (const GridConfig& config : {familiar_grid(), novel_grid()}) {
    const GridMdp grid = to_tabular_mdp(config);
    CHECK(validate_mdp(grid.mdp).ok());
    CHECK(validate_reward(grid.mdp, grid.reward).ok());
    CHECK(grid.mdp.n_actions == 5);
    CHECK(grid.mdp.discount == 0.99);

    const auto states = enumerate_states(config);
    double mass = 0.0;
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (grid.mdp.initial_dist[s] == 0.0) continue;
      mass += grid.mdp.initial_dist[s];
      CHECK(grid.mdp.initial_dist[s] == 0.5);
      CHECK(states[s].speed == 1);
      CHECK_FALSE(states[s].left.has_value());
      CHECK_FALSE(states[s].right.has_value());
      CHECK_FALSE(is_ditch_column(states[s].car_column));
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-15));
  }

  // The dense reward rows repeat each (s,a) branch reward across next states.
  const GridConfig config = familiar_grid();
  const GridMdp grid = to_tabular_mdp(config);
  const std::size_t ditch_cruiser = state_index(config, make_state(0, 1));
  const auto row = grid.reward.values.slice(ditch_cruiser,
                                            static_cast<std::size_t>(DriveAction::kCruise));
  for (std::size_t t = 0; t < grid.mdp.n_states; ++t) CHECK(row[t] == -1.0);
}

TEST_CASE("feature encoding") {
  const GridConfig config = familiar_grid();
  const DrivingState state = make_state(2, 1, Obstacle{1, 0}, Obstacle{0, 3});
  const auto features = encode_features(config, state);
  REQUIRE(features.size() == 52);  // 4 channels * 3 rows * 4 cols + 4 speeds

  const std::size_t grid = 12;
  auto at = [&](std::size_t channel, std::size_t row, std::size_t col) {
    return features[channel * grid + row * kGridColumns + col];
  };

  // Channel 0 marks pavement, channel 1 ditches, for every visible row.
  for (std::size_t row = 0; row < 3; ++row) {
    CHECK(at(0, row, 1) == 1.0);
    CHECK(at(0, row, 2) == 1.0);
    CHECK(at(0, row, 0) == 0.0);
    CHECK(at(1, row, 0) == 1.0);
    CHECK(at(1, row, 3) == 1.0);
    CHECK(at(1, row, 1) == 0.0);
  }

  // One car bit on the car row.
  double car_bits = 0.0;
  for (std::size_t i = 2 * grid; i < 3 * grid; ++i) car_bits += features[i];
  CHECK(car_bits == 1.0);
  CHECK(at(2, 2, 2) == 1.0);

  // Obstacle channel mirrors both obstacles.
  CHECK(at(3, 1, 0) == 1.0);
  CHECK(at(3, 0, 3) == 1.0);
  double obstacle_bits = 0.0;
  for (std::size_t i = 3 * grid; i < 4 * grid; ++i) obstacle_bits += features[i];
  CHECK(obstacle_bits == 2.0);

  // One-hot speed tail.
  CHECK(features[48 + 1] == 1.0);
  CHECK(features[48 + 0] + features[48 + 2] + features[48 + 3] == 0.0);

  // Distinct states get distinct encodings (novel grid, full sweep).
  const GridConfig novel = novel_grid();
  std::set<std::vector<double>> seen;
  for (const auto& s : enumerate_states(novel)) seen.insert(encode_features(novel, s));
  CHECK(seen.size() == 400);
}

TEST_CASE("safety statistics on a spawn-free strip") {
  GridConfig config = familiar_grid();
  config.obstacle_spawn_prob = 0.0;
  const GridMdp grid = to_tabular_mdp(config);
  const std::size_t n = grid.mdp.n_states;

  // Always-brake: one step at speed 1, then parked. Discounted speed is
  // (1-g) * 1 = 0.01. Always-cruise holds speed 1, so exactly 1. Always-
  // accelerate runs 1, 2, then tops out at 3.
  const auto brake = safety_stats(
      config, grid.mdp,
      test_helpers::deterministic_policy(n, 5, static_cast<std::size_t>(DriveAction::kBrake)));
  CHECK(brake.discounted_speed == doctest::Approx(0.01).epsilon(1e-10));

  const auto cruise = safety_stats(
      config, grid.mdp,
      test_helpers::deterministic_policy(n, 5, static_cast<std::size_t>(DriveAction::kCruise)));
  CHECK(cruise.discounted_speed == doctest::Approx(1.0).epsilon(1e-10));

  const auto accel = safety_stats(
      config, grid.mdp,
      test_helpers::deterministic_policy(n, 5,
                                         static_cast<std::size_t>(DriveAction::kAccelerate)));
  CHECK(accel.discounted_speed == doctest::Approx(2.9701).epsilon(1e-10));

  // Nothing ever spawns, so nothing can be hit from a clean start.
  for (const auto& stats : {brake, cruise, accel}) {
    CHECK(stats.discounted_collision_rate == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(stats.discounted_collision_speed == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("safety statistics are sane with traffic") {
  const GridConfig config = familiar_grid();
  const GridMdp grid = to_tabular_mdp(config);
  const auto cruise = safety_stats(
      config, grid.mdp,
      test_helpers::deterministic_policy(grid.mdp.n_states, 5,
                                         static_cast<std::size_t>(DriveAction::kCruise)));
  // Cruising on the road in the familiar strip never collides.
  CHECK(cruise.discounted_collision_rate == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(cruise.discounted_speed == doctest::Approx(1.0).epsilon(1e-10));

  // In the novel strip the same policy takes hits.
  const GridConfig novel = novel_grid();
  const GridMdp risky = to_tabular_mdp(novel);
  const auto novel_cruise = safety_stats(
      novel, risky.mdp,
      test_helpers::deterministic_policy(risky.mdp.n_states, 5,
                                         static_cast<std::size_t>(DriveAction::kCruise)));
  CHECK(novel_cruise.discounted_collision_rate > 0.0);
  CHECK(novel_cruise.discounted_collision_rate <= 1.0);
  CHECK(novel_cruise.discounted_collision_speed > 0.0);

  StationaryPolicy mismatched{Matrix(3, 5)};
  CHECK_THROWS_AS(safety_stats(novel, grid.mdp, mismatched), std::invalid_argument);
}

TEST_CASE("transition samples cover the distinct branches") {
  const GridConfig config = familiar_grid();
  const auto samples = transition_samples(config);
  CHECK_FALSE(samples.empty());

  std::set<std::tuple<std::size_t, std::size_t, double>> unique;
  bool found_ditch_step = false;
  for (const auto& sample : samples) {
    CHECK(sample.state < 144);
    CHECK(sample.next_state < 144);
    unique.emplace(sample.state, sample.next_state, sample.reward);
    if (sample.reward == -1.0) found_ditch_step = true;
  }
  CHECK(unique.size() == samples.size());
  CHECK(found_ditch_step);

  // Spot check: every branch of one (state, action) pair appears.
  const DrivingState state = make_state(1, 2);
  for (const auto& branch : successors(config, state, DriveAction::kCruise)) {
    const auto key = std::make_tuple(state_index(config, state),
                                     state_index(config, branch.next), branch.reward);
    CHECK(unique.count(key) == 1);
  }
}

TEST_CASE("render draws the strip") {
  const GridConfig config = familiar_grid();
  const DrivingState state = make_state(1, 2, Obstacle{1, 0});
  CHECK(render_state(config, state) == "X..d  \nd..d  \ndC.d 2\n");
  CHECK(render_state(config, make_state(2, 0)) == "d..d  \nd..d  \nd.Cd 0\n");
}

}  // TEST_SUITE
