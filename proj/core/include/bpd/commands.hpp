#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bpd/run_config.hpp"

namespace bpd {

struct RunOutputs {
  std::vector<std::string> files;  // relative to the output directory
  Json metrics = Json::object();
};

/// Runs `cfg.subcommand`, writing every artifact plus metrics.json into
/// `out_dir` (created if needed). Metric files are byte-identical for a
/// fixed config and seed.
RunOutputs run_subcommand(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// manifest.json: subcommand, resolved config, seed, version, threads, files.
void write_manifest(const RunConfig& cfg, const RunOutputs& outputs, int threads, const std::filesystem::path& out_dir);

}  // namespace bpd
