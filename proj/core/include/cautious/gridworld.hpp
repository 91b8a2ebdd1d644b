#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cautious/mdp.hpp"
#include "cautious/policy_eval.hpp"

namespace cautious {

/// Four-column driving strip: [ditch, road, road, ditch]. The car sits on the
/// bottom row and the world scrolls toward it; vision_rows rows of road are
/// visible ahead. Obstacles appear on newly revealed road, at most one per
/// half (left = columns 0-1, right = columns 2-3).
struct GridConfig {
  std::size_t vision_rows = 2;
  double obstacle_spawn_prob = 0.5;
  /// Columns obstacles may occupy. Ditch-only {0,3} is the variant reward
  /// models train on; {0,1,2,3} allows obstacles on the road itself.
  std::vector<std::size_t> obstacle_columns = {0, 3};
  double discount = 0.99;

  /// One faster than the agent can see: overdriving vision is possible.
  std::size_t speed_limit() const { return vision_rows + 1; }
};

GridConfig familiar_grid();
GridConfig novel_grid();

inline constexpr std::size_t kGridColumns = 4;
inline bool is_ditch_column(std::size_t column) { return column == 0 || column == 3; }

struct Obstacle {
  std::size_t row = 0;     // 0 is adjacent to the car row
  std::size_t column = 0;
};

struct DrivingState {
  std::size_t car_column = 1;
  std::size_t speed = 1;
  std::optional<Obstacle> left;   // column 0 or 1
  std::optional<Obstacle> right;  // column 2 or 3
};

enum class DriveAction : std::size_t {
  kLeft = 0,
  kRight = 1,
  kAccelerate = 2,
  kBrake = 3,
  kCruise = 4,
};
inline constexpr std::size_t kDriveActionCount = 5;
const char* drive_action_name(DriveAction action);

/// Canonical enumeration: lexicographic in (car_column, speed, left obstacle,
/// right obstacle), with "no obstacle" ordered before any placement and
/// placements ordered by (row, column).
std::vector<DrivingState> enumerate_states(const GridConfig& config);
std::size_t state_index(const GridConfig& config, const DrivingState& state);

struct DriveBranch {
  double probability = 0.0;
  DrivingState next;
  double reward = 0.0;
  bool collision = false;
};

/// Exact successor distribution. One step: lane changes shift the column
/// (clamped at the edges, full no-op at speed 0) and cost one space of
/// forward travel; accelerate/brake adjust the speed that applies from the
/// NEXT step; obstacles scroll down by the travel distance, colliding if they
/// reach the car's column; freshly revealed rows spawn obstacles into vacant
/// halves. Reward: +1 per forward space, -2 per forward space in a ditch
/// column, -2 * current speed per collision.
std::vector<DriveBranch> successors(const GridConfig& config, const DrivingState& state,
                                    DriveAction action);

/// Travel distance and collision are functions of (state, action) alone;
/// exposed for the safety-statistic pseudo-rewards.
std::size_t forward_distance(const DrivingState& state, DriveAction action);
bool collision_on(const GridConfig& config, const DrivingState& state, DriveAction action);

/// Dense MDP over the enumerated states, plus the true reward table. The
/// initial distribution is uniform over speed-1, obstacle-free, road-column
/// states.
struct GridMdp {
  TabularMdp mdp;
  RewardTable reward;
};
GridMdp to_tabular_mdp(const GridConfig& config);

/// Binary channels (pavement, ditch, car, obstacle) over a
/// (vision_rows + 1) x 4 grid, car row last, followed by a one-hot speed.
/// Length 4*(vision_rows+1)*4 + speed_limit + 1.
std::vector<double> encode_features(const GridConfig& config, const DrivingState& state);

/// Normalized gamma-discounted expectations under the policy from the MDP's
/// initial distribution, each computed by exact policy evaluation with a
/// pseudo-reward: the car's speed, a collision indicator, and speed at
/// collision.
struct SafetyStats {
  double discounted_speed = 0.0;
  double discounted_collision_rate = 0.0;
  double discounted_collision_speed = 0.0;
};
SafetyStats safety_stats(const GridConfig& config, const TabularMdp& mdp,
                         const StationaryPolicy& policy);

/// Every distinct (state, next_state, reward) transition branch, the training
/// set for gridworld reward regressors.
struct TransitionSample {
  std::size_t state = 0;
  std::size_t next_state = 0;
  double reward = 0.0;
};
std::vector<TransitionSample> transition_samples(const GridConfig& config);

/// Debug view: road rows top to bottom with the car row last; 'C' car,
/// 'X' obstacle, 'd' ditch, '.' road, and a trailing speedometer digit.
std::string render_state(const GridConfig& config, const DrivingState& state);

}  // namespace cautious
