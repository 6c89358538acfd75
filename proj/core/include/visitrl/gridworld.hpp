#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "visitrl/env.hpp"
#include "visitrl/mdp.hpp"

namespace visitrl {

/// Actions shared by every grid environment.
enum class GridAction : int { TurnLeft = 0, TurnRight = 1, Forward = 2, Stay = 3 };
inline constexpr int kGridActionCount = 4;

/// Directions are clockwise: 0 = east (+x), 1 = south (+y), 2 = west, 3 = north.
inline constexpr int kGridDirections = 4;

struct GridPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const GridPos&, const GridPos&) = default;
};

enum class GoalMode { Fixed, RandomPerEpisode };
enum class StartMode { Fixed, RandomPerEpisode };

/// Static description of a grid layout. For crossing-style layouts the
/// interior wall and its passage are not part of the spec; they are sampled
/// once when the environment is constructed (per seed).
struct GridSpec {
  std::string name;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> walls;  // row-major width*height, 1 = wall

  StartMode start_mode = StartMode::Fixed;
  GridPos start{1, 1};
  int start_dir = 0;

  GoalMode goal_mode = GoalMode::Fixed;
  GridPos goal{0, 0};

  /// Number of interior crossing walls to sample at construction (0 or 1).
  int crossing_walls = 0;

  bool wall_at(int x, int y) const;
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
};

/// Decoded view of a state index.
struct GridState {
  GridPos agent_pos;
  int agent_dir = 0;
  std::optional<GridPos> goal_pos;  // present when the goal is part of the state
  friend bool operator==(const GridState&, const GridState&) = default;
};

/// Grid ids understood by make_grid_spec: "Empty-<W>x<H>",
/// "SimpleCrossingS<k>N1" and "FourRooms".
GridSpec make_grid_spec(const std::string& id);
std::vector<std::string> registered_environments();

/// Parses a plain-text map: '#' wall, '.' floor, 'G' goal, 'S' start.
GridSpec parse_map(const std::string& text, const std::string& name = "custom");
GridSpec load_map_file(const std::string& path);

/// Deterministic sparse-reward grid environment. The reward is 1 exactly on
/// the transition that moves the agent onto the goal cell; states with the
/// agent on the goal are absorbing with zero reward. Motion into walls leaves
/// the state unchanged.
class GridEnv final : public DiscreteEnv {
 public:
  GridEnv(GridSpec spec, std::uint64_t seed = 0);

  const GridSpec& spec() const { return spec_; }   // walls realized
  const std::string& name() const { return spec_.name; }

  int cell_count() const { return static_cast<int>(cells_.size()); }
  GridPos cell(int cell_index) const { return cells_[cell_index]; }
  int cell_index(GridPos pos) const;  // -1 when pos is a wall or out of bounds

  GridState decode(int state) const;
  int state_index(const GridState& s) const;

  GridPos agent_position(int state) const;
  int agent_direction(int state) const;
  GridPos goal_position(int state) const;

  /// Pure deterministic dynamics.
  StepOutcome step(int state, int action) const;

  /// Exact initial-state distribution (dense over state indices).
  Eigen::VectorXd initial_distribution() const;

  // DiscreteEnv interface.
  int state_count() const override;
  int action_count() const override { return kGridActionCount; }
  const std::vector<int>& encoding_widths() const override { return widths_; }
  std::vector<int> state_components(int state) const override;
  int state_from_components(std::span<const int> components) const override;
  int sample_initial(Rng& rng) const override;
  StepOutcome sample_step(int state, int action, Rng& rng) const override;
  bool is_absorbing(int state) const override;

 private:
  bool random_goal() const { return spec_.goal_mode == GoalMode::RandomPerEpisode; }
  int base_state_count() const { return cell_count() * kGridDirections; }

  GridSpec spec_;
  std::vector<GridPos> cells_;       // non-wall cells, row-major
  std::vector<int> cell_index_map_;  // width*height -> cell index or -1
  std::vector<int> widths_;
  // Constant passage components (SimpleCrossing): orientation, wall coord, gap coord.
  std::vector<int> passage_components_;
  std::vector<int> passage_widths_;
};

/// Environment registry: constructs the environment for a string id, sampling
/// any per-seed layout randomization (crossing walls) from the seed.
std::unique_ptr<GridEnv> make_env(const std::string& id, std::uint64_t seed = 0);

/// Exact dense MDP whose rollouts are distribution-identical to the
/// simulator. Throws when the enumerated state count exceeds max_states.
TabularMdp to_tabular(const GridEnv& env, double gamma, int max_states = 4096);

}  // namespace visitrl
