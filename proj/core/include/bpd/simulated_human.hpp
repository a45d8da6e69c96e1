#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpd/gridworld.hpp"
#include "bpd/mdp.hpp"
#include "bpd/rng.hpp"

namespace bpd {

/// Side on which a walker passes the obstacle. Left-around keeps the obstacle
/// on the walker's right, i.e. travels clockwise around the ring; on the
/// default layout that is up the left column towards the tree and down the
/// right column back to the basket.
enum class Side { kLeftAround, kRightAround };

Side parse_side(const std::string& name);
std::string to_string(Side side);
inline Side other(Side s) { return s == Side::kLeftAround ? Side::kRightAround : Side::kLeftAround; }

/// Free cells of a gridworld whose free region is a single ring of width one
/// around the obstacle, so every leg between basket and tree has exactly two
/// routes, one per side.
class RingRoutes {
 public:
  /// Throws std::invalid_argument if the free region is not such a ring.
  explicit RingRoutes(const AppleGridworld& world);

  /// Cell after `cell` when walking around the ring on `side`.
  int next_cell(int cell, Side side) const;
  /// Move that walks from `cell` to next_cell(cell, side).
  int move_towards(int cell, Side side) const;
  /// Side of the route used to arrive at `cell` from `prev` (adjacent cells).
  Side side_of_step(int prev, int cell) const;
  /// Cells in clockwise order.
  const std::vector<int>& clockwise() const noexcept { return order_; }

 private:
  const AppleGridworld* world_;
  std::vector<int> order_;
  std::vector<int> position_;  // cell -> index in order_
};

struct SimulatedHuman {
  double consistency = 1.0;
  Side usual_to_tree = Side::kLeftAround;
  Side usual_back = Side::kLeftAround;
  std::uint64_t seed = 0;
  void validate() const;
};

/// Human with consistency `c` and usual sides drawn uniformly from `seed`.
SimulatedHuman random_simulated_human(double consistency, std::uint64_t seed);

/// Stateful walker for one episode. At the start of every leg (heading to the
/// tree, or heading back while carrying) it picks its usual side with
/// probability c, otherwise the other side, and then follows that side.
class HumanWalker {
 public:
  HumanWalker(const AppleGridworld& world, const RingRoutes& routes, const SimulatedHuman& human, Rng rng);

  /// Action at single-agent state `state`. A blocked move is simply retried.
  int act(int state);
  /// Sides chosen so far, one per leg.
  const std::vector<Side>& legs() const noexcept { return legs_; }

 private:
  const AppleGridworld* world_;
  const RingRoutes* routes_;
  SimulatedHuman human_;
  Rng rng_;
  int leg_carrying_ = -1;
  Side side_ = Side::kLeftAround;
  std::vector<Side> legs_;
};

/// `episodes` trajectories of length `horizon` from the basket start.
/// Deterministic in (human, seed).
std::vector<Trajectory> simulate_humans(const AppleGridworld& world, const SimulatedHuman& human, int episodes,
                                        int horizon, std::uint64_t seed);

/// Side of every completed or started leg in a trajectory, read from the
/// first move of each leg.
std::vector<Side> leg_sides(const AppleGridworld& world, const RingRoutes& routes, const Trajectory& trajectory);

}  // namespace bpd
