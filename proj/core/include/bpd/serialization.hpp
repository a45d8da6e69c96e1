#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "bpd/mdp.hpp"

namespace bpd {

using Json = nlohmann::json;

/// {"num_states", "num_actions", "discount", "start_dist", "transitions" (S x A x S'),
///  "rewards" (S x A)}
Json mdp_to_json(const TabularMDP& mdp);
TabularMDP mdp_from_json(const Json& doc);

Json policy_to_json(const TabularPolicy& policy);
TabularPolicy policy_from_json(const Json& doc);

/// One JSON object per step: {"episode", "t", "state", "action"}; t starts at 1.
void write_trajectories_jsonl(std::ostream& out, std::span<const Trajectory> episodes);
std::vector<Trajectory> read_trajectories_jsonl(std::istream& in);

/// Formats a double with round-trip precision, independent of locale.
std::string format_double(double v);

}  // namespace bpd
