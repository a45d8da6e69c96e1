#include "bpd/serialization.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace bpd {

Json mdp_to_json(const TabularMDP& mdp) {
  const int ns = mdp.num_states();
  const int na = mdp.num_actions();
  Json p = Json::array();
  Json r = Json::array();
  for (int s = 0; s < ns; ++s) {
    Json ps = Json::array();
    Json rs = Json::array();
    for (int a = 0; a < na; ++a) {
      const auto row = mdp.next_state_dist(s, a);
      ps.push_back(std::vector<double>(row.begin(), row.end()));
      rs.push_back(mdp.reward(s, a));
    }
    p.push_back(std::move(ps));
    r.push_back(std::move(rs));
  }
  const auto rho = mdp.start_dist();
  return Json{{"num_states", ns},
              {"num_actions", na},
              {"discount", mdp.discount()},
              {"start_dist", std::vector<double>(rho.begin(), rho.end())},
              {"transitions", std::move(p)},
              {"rewards", std::move(r)}};
}

TabularMDP mdp_from_json(const Json& doc) {
  const int ns = doc.at("num_states").get<int>();
  const int na = doc.at("num_actions").get<int>();
  if (ns <= 0 || na <= 0) throw std::invalid_argument("mdp json: dimensions must be positive");
  std::vector<double> p;
  std::vector<double> r;
  p.reserve(static_cast<std::size_t>(ns) * static_cast<std::size_t>(na) * static_cast<std::size_t>(ns));
  const Json& pt = doc.at("transitions");
  const Json& rt = doc.at("rewards");
  if (pt.size() != static_cast<std::size_t>(ns) || rt.size() != static_cast<std::size_t>(ns)) {
    throw std::invalid_argument("mdp json: table row count does not match num_states");
  }
  for (int s = 0; s < ns; ++s) {
    const Json& ps = pt.at(static_cast<std::size_t>(s));
    const Json& rs = rt.at(static_cast<std::size_t>(s));
    if (ps.size() != static_cast<std::size_t>(na) || rs.size() != static_cast<std::size_t>(na)) {
      throw std::invalid_argument("mdp json: table column count does not match num_actions");
    }
    for (int a = 0; a < na; ++a) {
      const auto row = ps.at(static_cast<std::size_t>(a)).get<std::vector<double>>();
      if (row.size() != static_cast<std::size_t>(ns)) throw std::invalid_argument("mdp json: transition row has wrong length");
      p.insert(p.end(), row.begin(), row.end());
      r.push_back(rs.at(static_cast<std::size_t>(a)).get<double>());
    }
  }
  return TabularMDP(ns, na, std::move(p), std::move(r), doc.at("discount").get<double>(),
                    doc.at("start_dist").get<std::vector<double>>());
}

Json policy_to_json(const TabularPolicy& policy) {
  const auto probs = policy.probs();
  return Json{{"num_states", policy.num_states()},
              {"num_actions", policy.num_actions()},
              {"probs", std::vector<double>(probs.begin(), probs.end())}};
}

TabularPolicy policy_from_json(const Json& doc) {
  return TabularPolicy(doc.at("num_states").get<int>(), doc.at("num_actions").get<int>(),
                       doc.at("probs").get<std::vector<double>>());
}

void write_trajectories_jsonl(std::ostream& out, std::span<const Trajectory> episodes) {
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& steps = episodes[e].steps;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      out << Json{{"episode", e}, {"t", t + 1}, {"state", steps[t].state}, {"action", steps[t].action}}.dump() << '\n';
    }
  }
}

std::vector<Trajectory> read_trajectories_jsonl(std::istream& in) {
  std::vector<Trajectory> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const Json rec = Json::parse(line);
    const auto episode = rec.at("episode").get<std::size_t>();
    const auto t = rec.at("t").get<std::size_t>();
    if (episode >= out.size()) out.resize(episode + 1);
    auto& steps = out[episode].steps;
    if (t != steps.size() + 1) {
      throw std::invalid_argument("trajectory jsonl line " + std::to_string(line_no) + ": steps must be consecutive");
    }
    steps.push_back({rec.at("state").get<int>(), rec.at("action").get<int>()});
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace bpd
