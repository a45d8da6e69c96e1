#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

#include "bpd/mdp.hpp"

namespace bpd {

struct Cell {
  int x = 0;  // column, 0 = left
  int y = 0;  // row, 0 = bottom
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Move : int { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };
inline constexpr int kNumMoves = 4;

Cell apply_move(Cell c, Move m);

struct GridworldConfig {
  int width = 5;
  int height = 5;
  std::set<Cell> obstacle = default_obstacle();
  Cell tree_cell{4, 4};
  Cell basket_cell{0, 0};
  double discount = 0.9;
  /// Reward for each apple dropped in the basket.
  double apple_reward = 1.0;

  /// Central 3x3 block of the default 5x5 layout.
  static std::set<Cell> default_obstacle();
};

/// Apple-picking gridworld: state = (free cell, carrying flag), four moves,
/// blocked moves are no-ops, reward 1 when an apple is dropped in the basket.
class AppleGridworld {
 public:
  explicit AppleGridworld(GridworldConfig cfg);

  const GridworldConfig& config() const noexcept { return cfg_; }
  const TabularMDP& mdp() const noexcept { return mdp_; }
  int num_cells() const noexcept { return static_cast<int>(cells_.size()); }
  int num_states() const noexcept { return 2 * num_cells(); }
  const std::vector<Cell>& cells() const noexcept { return cells_; }

  bool is_free(Cell c) const;
  std::optional<int> cell_index(Cell c) const;
  int state_index(int cell, bool carrying) const { return 2 * cell + (carrying ? 1 : 0); }
  int cell_of(int state) const { return state / 2; }
  bool carrying(int state) const { return (state % 2) == 1; }
  int start_state() const { return state_index(*cell_index(cfg_.basket_cell), false); }

  /// Cell reached from `cell` by `move` (unchanged if blocked).
  int move_cell(int cell, Move m) const;
  /// Carrying flag after entering `cell` with flag `carrying`; sets `delivered`.
  bool next_carrying(int cell, bool carrying, bool& delivered) const;
  /// Deterministic one-step transition on a single-agent state.
  std::pair<int, double> step(int state, int action) const;

  /// Free cells adjacent to `cell`.
  std::vector<int> neighbors(int cell) const;

 private:
  GridworldConfig cfg_;
  std::vector<Cell> cells_;
  std::vector<int> lookup_;  // width*height -> cell index or -1
  TabularMDP mdp_;
};

/// Builds the single-agent apple-picking MDP. Throws std::invalid_argument if
/// the free region is disconnected or the tree/basket cells are blocked.
TabularMDP build_apple_gridworld(const GridworldConfig& cfg);

struct TwoPlayerConfig {
  GridworldConfig grid;
  /// Start cells for the two agents; every permutation is equally likely.
  std::array<Cell, 2> start_cells{Cell{0, 0}, Cell{0, 1}};
  std::int64_t max_states = 100000;
};

/// Cooperative two-agent apple gridworld reduced to a single agent that picks
/// a joint action (a0, a1). Agents move simultaneously and never share a cell;
/// the shared reward counts apples delivered by either agent.
class JointGridworld {
 public:
  explicit JointGridworld(TwoPlayerConfig cfg);

  const TwoPlayerConfig& config() const noexcept { return cfg_; }
  const AppleGridworld& single() const noexcept { return single_; }
  const TabularMDP& mdp() const noexcept { return mdp_; }
  int num_states() const noexcept { return static_cast<int>(agent_states_.size()); }
  int num_agent_actions() const noexcept { return kNumMoves; }
  int num_joint_actions() const noexcept { return kNumMoves * kNumMoves; }
  int joint_action(int a0, int a1) const { return a0 * kNumMoves + a1; }

  /// Single-agent states (cell, carrying) of agent 0 and agent 1.
  std::pair<int, int> agent_states(int joint_state) const { return agent_states_[static_cast<std::size_t>(joint_state)]; }
  std::optional<int> joint_state(int agent0_state, int agent1_state) const;
  /// Joint start states, one per start-cell permutation.
  const std::vector<int>& start_states() const noexcept { return start_states_; }

  /// Deterministic joint transition; returns (next joint state, shared reward).
  std::pair<int, double> step(int joint_state, int a0, int a1) const;

 private:
  TwoPlayerConfig cfg_;
  AppleGridworld single_;
  std::vector<std::pair<int, int>> agent_states_;
  std::vector<int> lookup_;  // (s0 * S + s1) -> joint index or -1
  std::vector<int> start_states_;
  TabularMDP mdp_;
};

/// Number of joint states the two-player composition would enumerate.
std::int64_t two_player_state_count(const GridworldConfig& grid);

/// Builds the joint MDP (joint actions = Cartesian product). Throws if the
/// state count exceeds cfg.max_states.
TabularMDP compose_two_player(const TwoPlayerConfig& cfg);

}  // namespace bpd
