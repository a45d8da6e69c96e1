#include "bpd/gridworld.hpp"

#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace bpd {

Cell apply_move(Cell c, Move m) {
  switch (m) {
    case Move::kUp: return {c.x, c.y + 1};
    case Move::kDown: return {c.x, c.y - 1};
    case Move::kLeft: return {c.x - 1, c.y};
    case Move::kRight: return {c.x + 1, c.y};
  }
  return c;
}

std::set<Cell> GridworldConfig::default_obstacle() {
  std::set<Cell> block;
  for (int x = 1; x <= 3; ++x)
    for (int y = 1; y <= 3; ++y) block.insert({x, y});
  return block;
}

namespace {

std::string describe(Cell c) { return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")"; }

std::vector<Cell> validated_free_cells(const GridworldConfig& cfg) {
  if (cfg.width <= 0 || cfg.height <= 0) throw std::invalid_argument("gridworld: width and height must be positive");
  if (!(cfg.discount >= 0.0 && cfg.discount < 1.0)) throw std::invalid_argument("gridworld: discount must lie in [0, 1)");
  if (!(cfg.apple_reward > 0.0) || !std::isfinite(cfg.apple_reward)) {
    throw std::invalid_argument("gridworld: apple_reward must be finite and > 0");
  }
  auto inside = [&](Cell c) { return c.x >= 0 && c.y >= 0 && c.x < cfg.width && c.y < cfg.height; };
  for (Cell c : {cfg.tree_cell, cfg.basket_cell}) {
    if (!inside(c) || cfg.obstacle.contains(c)) throw std::invalid_argument("gridworld: tree/basket cell " + describe(c) + " is blocked");
  }
  if (cfg.tree_cell == cfg.basket_cell) throw std::invalid_argument("gridworld: tree and basket must differ");

  std::vector<Cell> cells;
  for (int y = 0; y < cfg.height; ++y)
    for (int x = 0; x < cfg.width; ++x)
      if (!cfg.obstacle.contains(Cell{x, y})) cells.push_back({x, y});

  // Connectivity of the free region by BFS from the basket.
  std::set<Cell> seen{cfg.basket_cell};
  std::queue<Cell> frontier;
  frontier.push(cfg.basket_cell);
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop();
    for (int m = 0; m < kNumMoves; ++m) {
      const Cell n = apply_move(c, static_cast<Move>(m));
      if (inside(n) && !cfg.obstacle.contains(n) && seen.insert(n).second) frontier.push(n);
    }
  }
  if (seen.size() != cells.size()) throw std::invalid_argument("gridworld: free region is disconnected");
  return cells;
}

}  // namespace

AppleGridworld::AppleGridworld(GridworldConfig cfg)
    : cfg_(std::move(cfg)), cells_(validated_free_cells(cfg_)), mdp_(build_apple_gridworld(cfg_)) {
  lookup_.assign(static_cast<std::size_t>(cfg_.width * cfg_.height), -1);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    lookup_[static_cast<std::size_t>(cells_[i].y * cfg_.width + cells_[i].x)] = static_cast<int>(i);
  }
}

bool AppleGridworld::is_free(Cell c) const { return cell_index(c).has_value(); }

std::optional<int> AppleGridworld::cell_index(Cell c) const {
  if (c.x < 0 || c.y < 0 || c.x >= cfg_.width || c.y >= cfg_.height) return std::nullopt;
  const int idx = lookup_[static_cast<std::size_t>(c.y * cfg_.width + c.x)];
  if (idx < 0) return std::nullopt;
  return idx;
}

int AppleGridworld::move_cell(int cell, Move m) const {
  const auto next = cell_index(apply_move(cells_[static_cast<std::size_t>(cell)], m));
  return next ? *next : cell;
}

bool AppleGridworld::next_carrying(int cell, bool carrying, bool& delivered) const {
  const Cell c = cells_[static_cast<std::size_t>(cell)];
  delivered = false;
  if (!carrying && c == cfg_.tree_cell) return true;
  if (carrying && c == cfg_.basket_cell) {
    delivered = true;
    return false;
  }
  return carrying;
}

std::pair<int, double> AppleGridworld::step(int state, int action) const {
  const int next_cell = move_cell(cell_of(state), static_cast<Move>(action));
  bool delivered = false;
  const bool carry = next_carrying(next_cell, carrying(state), delivered);
  return {state_index(next_cell, carry), delivered ? cfg_.apple_reward : 0.0};
}

std::vector<int> AppleGridworld::neighbors(int cell) const {
  std::vector<int> out;
  for (int m = 0; m < kNumMoves; ++m) {
    const int n = move_cell(cell, static_cast<Move>(m));
    if (n != cell) out.push_back(n);
  }
  return out;
}

TabularMDP build_apple_gridworld(const GridworldConfig& cfg) {
  const std::vector<Cell> cells = validated_free_cells(cfg);
  std::vector<int> lookup(static_cast<std::size_t>(cfg.width * cfg.height), -1);
  for (std::size_t i = 0; i < cells.size(); ++i) lookup[static_cast<std::size_t>(cells[i].y * cfg.width + cells[i].x)] = static_cast<int>(i);
  auto index_of = [&](Cell c) -> int {
    if (c.x < 0 || c.y < 0 || c.x >= cfg.width || c.y >= cfg.height) return -1;
    return lookup[static_cast<std::size_t>(c.y * cfg.width + c.x)];
  };

  const int num_cells = static_cast<int>(cells.size());
  const int ns = 2 * num_cells;
  std::vector<double> p(static_cast<std::size_t>(ns) * kNumMoves * static_cast<std::size_t>(ns), 0.0);
  std::vector<double> r(static_cast<std::size_t>(ns) * kNumMoves, 0.0);
  for (int cell = 0; cell < num_cells; ++cell) {
    for (int carry = 0; carry < 2; ++carry) {
      const int s = 2 * cell + carry;
      for (int a = 0; a < kNumMoves; ++a) {
        int next_cell = index_of(apply_move(cells[static_cast<std::size_t>(cell)], static_cast<Move>(a)));
        if (next_cell < 0) next_cell = cell;
        const Cell nc = cells[static_cast<std::size_t>(next_cell)];
        bool next_carry = carry != 0;
        double reward = 0.0;
        if (!next_carry && nc == cfg.tree_cell) {
          next_carry = true;
        } else if (next_carry && nc == cfg.basket_cell) {
          next_carry = false;
          reward = cfg.apple_reward;
        }
        const int ns_idx = 2 * next_cell + (next_carry ? 1 : 0);
        p[(static_cast<std::size_t>(s) * kNumMoves + static_cast<std::size_t>(a)) * static_cast<std::size_t>(ns) +
          static_cast<std::size_t>(ns_idx)] = 1.0;
        r[static_cast<std::size_t>(s) * kNumMoves + static_cast<std::size_t>(a)] = reward;
      }
    }
  }
  std::vector<double> rho(static_cast<std::size_t>(ns), 0.0);
  rho[static_cast<std::size_t>(2 * index_of(cfg.basket_cell))] = 1.0;
  return TabularMDP(ns, kNumMoves, std::move(p), std::move(r), cfg.discount, std::move(rho));
}

std::int64_t two_player_state_count(const GridworldConfig& grid) {
  const auto cells = static_cast<std::int64_t>(validated_free_cells(grid).size());
  return cells * (cells - 1) * 4;
}

namespace {

void check_two_player(const TwoPlayerConfig& cfg) {
  const std::int64_t count = two_player_state_count(cfg.grid);
  if (count > cfg.max_states) {
    throw std::invalid_argument("two-player gridworld has " + std::to_string(count) +
                                " joint states, above the cap of " + std::to_string(cfg.max_states));
  }
  if (cfg.start_cells[0] == cfg.start_cells[1]) throw std::invalid_argument("two-player gridworld: start cells must differ");
  for (Cell c : cfg.start_cells) {
    if (c.x < 0 || c.y < 0 || c.x >= cfg.grid.width || c.y >= cfg.grid.height || cfg.grid.obstacle.contains(c)) {
      throw std::invalid_argument("two-player gridworld: start cell " + describe(c) + " is blocked");
    }
  }
}

}  // namespace

JointGridworld::JointGridworld(TwoPlayerConfig cfg)
    : cfg_((check_two_player(cfg), std::move(cfg))),
      single_(cfg_.grid),
      mdp_(compose_two_player(cfg_)) {
  const int ns = single_.num_states();
  lookup_.assign(static_cast<std::size_t>(ns) * static_cast<std::size_t>(ns), -1);
  for (int s0 = 0; s0 < ns; ++s0) {
    for (int s1 = 0; s1 < ns; ++s1) {
      if (single_.cell_of(s0) == single_.cell_of(s1)) continue;
      lookup_[static_cast<std::size_t>(s0 * ns + s1)] = static_cast<int>(agent_states_.size());
      agent_states_.emplace_back(s0, s1);
    }
  }
  for (int perm = 0; perm < 2; ++perm) {
    const int c0 = *single_.cell_index(cfg_.start_cells[static_cast<std::size_t>(perm)]);
    const int c1 = *single_.cell_index(cfg_.start_cells[static_cast<std::size_t>(1 - perm)]);
    start_states_.push_back(*joint_state(single_.state_index(c0, false), single_.state_index(c1, false)));
  }
}

std::optional<int> JointGridworld::joint_state(int agent0_state, int agent1_state) const {
  const int ns = single_.num_states();
  if (agent0_state < 0 || agent1_state < 0 || agent0_state >= ns || agent1_state >= ns) return std::nullopt;
  const int idx = lookup_[static_cast<std::size_t>(agent0_state * ns + agent1_state)];
  if (idx < 0) return std::nullopt;
  return idx;
}

namespace {

// Resolves simultaneous moves so that agents never share a cell: contested
// targets and swaps block both agents; moving into a cell whose occupant
// stays put is blocked.
std::pair<int, int> resolve_moves(int from0, int to0, int from1, int to1) {
  if (to0 == to1) return {from0, from1};
  if (to0 == from1 && to1 == from0) return {from0, from1};
  int r0 = to0;
  int r1 = to1;
  if (r0 == from1 && r1 == from1) r0 = from0;
  if (r1 == from0 && r0 == from0) r1 = from1;
  return {r0, r1};
}

}  // namespace

std::pair<int, double> JointGridworld::step(int joint, int a0, int a1) const {
  const auto [s0, s1] = agent_states(joint);
  const int c0 = single_.cell_of(s0);
  const int c1 = single_.cell_of(s1);
  const auto [n0, n1] = resolve_moves(c0, single_.move_cell(c0, static_cast<Move>(a0)), c1,
                                      single_.move_cell(c1, static_cast<Move>(a1)));
  bool d0 = false;
  bool d1 = false;
  const bool k0 = single_.next_carrying(n0, single_.carrying(s0), d0);
  const bool k1 = single_.next_carrying(n1, single_.carrying(s1), d1);
  const int next = *joint_state(single_.state_index(n0, k0), single_.state_index(n1, k1));
  const double reward_unit = cfg_.grid.apple_reward;
  return {next, (d0 ? reward_unit : 0.0) + (d1 ? reward_unit : 0.0)};
}

TabularMDP compose_two_player(const TwoPlayerConfig& cfg) {
  check_two_player(cfg);
  const AppleGridworld single(cfg.grid);
  const int ns = single.num_states();
  const double reward_unit = cfg.grid.apple_reward;
  std::vector<std::pair<int, int>> states;
  std::vector<int> lookup(static_cast<std::size_t>(ns) * static_cast<std::size_t>(ns), -1);
  for (int s0 = 0; s0 < ns; ++s0) {
    for (int s1 = 0; s1 < ns; ++s1) {
      if (single.cell_of(s0) == single.cell_of(s1)) continue;
      lookup[static_cast<std::size_t>(s0 * ns + s1)] = static_cast<int>(states.size());
      states.emplace_back(s0, s1);
    }
  }
  const int nj = static_cast<int>(states.size());
  const int na = kNumMoves * kNumMoves;
  std::vector<double> p(static_cast<std::size_t>(nj) * static_cast<std::size_t>(na) * static_cast<std::size_t>(nj), 0.0);
  std::vector<double> r(static_cast<std::size_t>(nj) * static_cast<std::size_t>(na), 0.0);
  for (int j = 0; j < nj; ++j) {
    const auto [s0, s1] = states[static_cast<std::size_t>(j)];
    const int c0 = single.cell_of(s0);
    const int c1 = single.cell_of(s1);
    for (int a0 = 0; a0 < kNumMoves; ++a0) {
      for (int a1 = 0; a1 < kNumMoves; ++a1) {
        const auto [n0, n1] = resolve_moves(c0, single.move_cell(c0, static_cast<Move>(a0)), c1,
                                            single.move_cell(c1, static_cast<Move>(a1)));
        bool d0 = false;
        bool d1 = false;
        const bool k0 = single.next_carrying(n0, single.carrying(s0), d0);
        const bool k1 = single.next_carrying(n1, single.carrying(s1), d1);
        const int next = lookup[static_cast<std::size_t>(single.state_index(n0, k0) * ns + single.state_index(n1, k1))];
        const std::size_t sa = static_cast<std::size_t>(j) * static_cast<std::size_t>(na) +
                               static_cast<std::size_t>(a0 * kNumMoves + a1);
        p[sa * static_cast<std::size_t>(nj) + static_cast<std::size_t>(next)] = 1.0;
        r[sa] = (d0 ? reward_unit : 0.0) + (d1 ? reward_unit : 0.0);
      }
    }
  }
  std::vector<double> rho(static_cast<std::size_t>(nj), 0.0);
  for (int perm = 0; perm < 2; ++perm) {
    const int c0 = *single.cell_index(cfg.start_cells[static_cast<std::size_t>(perm)]);
    const int c1 = *single.cell_index(cfg.start_cells[static_cast<std::size_t>(1 - perm)]);
    rho[static_cast<std::size_t>(lookup[static_cast<std::size_t>(single.state_index(c0, false) * ns +
                                                                 single.state_index(c1, false))])] += 0.5;
  }
  return TabularMDP(nj, na, std::move(p), std::move(r), cfg.grid.discount, std::move(rho));
}

}  // namespace bpd
