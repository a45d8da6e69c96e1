#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "bpd/commands.hpp"
#include "bpd/parallel.hpp"
#include "bpd/run_config.hpp"
#include "bpd/version.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "runs/out";
  std::int64_t seed = -1;
  int threads = 1;
};

bpd::Json load_document(const Options& opt) {
  bpd::Json doc = bpd::Json::object();
  if (!opt.config.empty()) {
    std::ifstream in(opt.config);
    if (!in) throw bpd::ConfigError("--config", "cannot open " + opt.config);
    doc = bpd::Json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw bpd::ConfigError("--config", opt.config + " is not valid JSON");
  }
  bpd::Json full = bpd::default_config();
  bpd::merge_config(full, doc);
  for (const auto& o : opt.overrides) bpd::apply_override(full, o);
  if (opt.seed >= 0) full["seed"] = opt.seed;
  return full;
}

int run(const std::string& subcommand, const Options& opt) {
  bpd::RunConfig cfg;
  try {
    if (opt.threads < 1) throw bpd::ConfigError("--threads", "must be >= 1");
    cfg = bpd::parse_run_config(subcommand, load_document(opt));
  } catch (const bpd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    bpd::set_max_threads(opt.threads);
    const std::filesystem::path out(opt.out);
    const bpd::RunOutputs outputs = bpd::run_subcommand(cfg, out);
    bpd::write_manifest(cfg, outputs, opt.threads, out);
    std::cout << outputs.metrics.dump(2) << '\n';
    std::cout << "wrote " << outputs.files.size() + 1 << " files to " << out.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << subcommand << " failed: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> d{
      {"train-bpd", "train a latent policy model against the base measure"},
      {"oracle", "marginals or posterior predictive by quadrature or importance sampling"},
      {"eval-prediction", "cross-entropy of next-action predictors on simulated humans"},
      {"simulate-humans", "write simulated-human trajectories"},
      {"mutual-info", "action mutual information across timesteps"},
      {"train-collab", "train best-response robots against human models"},
      {"eval-collab", "evaluate robots with simulated human partners"},
      {"maxent", "soft value iteration"}};
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boltzmann policy distribution experiments"};
  app.set_version_flag("--version", std::string(bpd::kVersion) + " (" + bpd::kGitRevision + ")");
  app.require_subcommand(1);
  Options opt;
  std::string chosen;
  for (const auto& name : bpd::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, descriptions().at(name));
    sub->add_option("--config", opt.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", opt.overrides, "override, key.path=value (repeatable)");
    sub->add_option("--out", opt.out, "output directory")->capture_default_str();
    sub->add_option("--seed", opt.seed, "global seed (overrides the config)")->check(CLI::NonNegativeNumber);
    sub->add_option("--threads", opt.threads, "worker thread cap")->capture_default_str();
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  return run(chosen, opt);
}
