#include "bpd/simulated_human.hpp"

#include <algorithm>
#include <stdexcept>

namespace bpd {

Side parse_side(const std::string& name) {
  if (name == "left-around") return Side::kLeftAround;
  if (name == "right-around") return Side::kRightAround;
  throw std::invalid_argument("unknown side '" + name + "' (expected left-around or right-around)");
}

std::string to_string(Side side) { return side == Side::kLeftAround ? "left-around" : "right-around"; }

RingRoutes::RingRoutes(const AppleGridworld& world) : world_(&world) {
  const int n = world.num_cells();
  for (int c = 0; c < n; ++c) {
    if (world.neighbors(c).size() != 2) {
      throw std::invalid_argument("simulated humans need the free cells to form a single ring around the obstacle");
    }
  }
  const int basket = *world.cell_index(world.config().basket_cell);
  std::vector<int> order{basket};
  int prev = basket;
  int cur = world.neighbors(basket)[0];
  while (cur != basket) {
    order.push_back(cur);
    const auto nb = world.neighbors(cur);
    const int next = nb[0] == prev ? nb[1] : nb[0];
    prev = cur;
    cur = next;
  }
  if (static_cast<int>(order.size()) != n) {
    throw std::invalid_argument("simulated humans need the free cells to form a single ring around the obstacle");
  }
  // Shoelace area; negative means clockwise with y pointing up.
  double area = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Cell a = world.cells()[static_cast<std::size_t>(order[i])];
    const Cell b = world.cells()[static_cast<std::size_t>(order[(i + 1) % order.size()])];
    area += static_cast<double>(a.x) * b.y - static_cast<double>(b.x) * a.y;
  }
  if (area > 0.0) std::reverse(order.begin() + 1, order.end());
  order_ = std::move(order);
  position_.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < order_.size(); ++i) position_[static_cast<std::size_t>(order_[i])] = static_cast<int>(i);
  const int tree = *world.cell_index(world.config().tree_cell);
  if (tree == basket) throw std::invalid_argument("simulated humans need distinct tree and basket cells");
}

int RingRoutes::next_cell(int cell, Side side) const {
  const int n = static_cast<int>(order_.size());
  const int p = position_[static_cast<std::size_t>(cell)];
  return order_[static_cast<std::size_t>(side == Side::kLeftAround ? (p + 1) % n : (p + n - 1) % n)];
}

int RingRoutes::move_towards(int cell, Side side) const {
  const int target = next_cell(cell, side);
  for (int m = 0; m < kNumMoves; ++m) {
    if (world_->move_cell(cell, static_cast<Move>(m)) == target) return m;
  }
  throw std::logic_error("RingRoutes: ring neighbours are not adjacent");
}

Side RingRoutes::side_of_step(int prev, int cell) const {
  if (next_cell(prev, Side::kLeftAround) == cell) return Side::kLeftAround;
  if (next_cell(prev, Side::kRightAround) == cell) return Side::kRightAround;
  throw std::invalid_argument("RingRoutes: cells are not ring neighbours");
}

void SimulatedHuman::validate() const {
  if (!(consistency >= 0.5 && consistency <= 1.0)) throw std::invalid_argument("human consistency must lie in [0.5, 1]");
}

SimulatedHuman random_simulated_human(double consistency, std::uint64_t seed) {
  Rng rng = make_rng(seed, "human-habits");
  SimulatedHuman h;
  h.consistency = consistency;
  h.usual_to_tree = uniform01(rng) < 0.5 ? Side::kLeftAround : Side::kRightAround;
  h.usual_back = uniform01(rng) < 0.5 ? Side::kLeftAround : Side::kRightAround;
  h.seed = seed;
  h.validate();
  return h;
}

HumanWalker::HumanWalker(const AppleGridworld& world, const RingRoutes& routes, const SimulatedHuman& human, Rng rng)
    : world_(&world), routes_(&routes), human_(human), rng_(std::move(rng)) {
  human_.validate();
}

int HumanWalker::act(int state) {
  const int carrying = world_->carrying(state) ? 1 : 0;
  if (carrying != leg_carrying_) {
    leg_carrying_ = carrying;
    const Side usual = carrying ? human_.usual_back : human_.usual_to_tree;
    side_ = uniform01(rng_) < human_.consistency ? usual : other(usual);
    legs_.push_back(side_);
  }
  return routes_->move_towards(world_->cell_of(state), side_);
}

std::vector<Trajectory> simulate_humans(const AppleGridworld& world, const SimulatedHuman& human, int episodes,
                                        int horizon, std::uint64_t seed) {
  human.validate();
  if (episodes < 0 || horizon < 1) throw std::invalid_argument("simulate_humans: episodes >= 0 and horizon >= 1 required");
  const RingRoutes routes(world);
  const std::uint64_t stream = derive_seed(derive_seed(seed, human.seed), "simulate");
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(episodes));
  for (int e = 0; e < episodes; ++e) {
    HumanWalker walker(world, routes, human, Rng(derive_seed(stream, static_cast<std::uint64_t>(e))));
    Trajectory traj;
    int s = world.start_state();
    for (int t = 0; t < horizon; ++t) {
      const int a = walker.act(s);
      traj.steps.push_back({s, a});
      s = world.step(s, a).first;
    }
    out.push_back(std::move(traj));
  }
  return out;
}

std::vector<Side> leg_sides(const AppleGridworld& world, const RingRoutes& routes, const Trajectory& trajectory) {
  std::vector<Side> sides;
  int leg_carrying = -1;
  for (const Step& st : trajectory.steps) {
    const int carrying = world.carrying(st.state) ? 1 : 0;
    const int cell = world.cell_of(st.state);
    const int next = world.move_cell(cell, static_cast<Move>(st.action));
    if (carrying != leg_carrying && next != cell) {
      leg_carrying = carrying;
      sides.push_back(routes.side_of_step(cell, next));
    }
  }
  return sides;
}

}  // namespace bpd
