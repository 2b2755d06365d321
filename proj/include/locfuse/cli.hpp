#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "locfuse/experiment.hpp"

namespace locfuse {

inline constexpr const char* kManifestFormat = "locfuse-manifest-1";

nlohmann::json report_to_json(const MetricsReport& report);

/// Options that are not part of ExperimentConfig.
struct CommandOptions {
  std::size_t samples{10000};
  double bench_snr_db{20.0};
  bool operator==(const CommandOptions&) const = default;
};

/// Executes a resolved command and returns the files it produces
/// (relative name, content). Nothing is written to disk.
std::vector<std::pair<std::string, std::string>> execute_command(const std::string& command,
                                                                 const ExperimentConfig& config,
                                                                 const CommandOptions& options);

nlohmann::json make_manifest(const std::string& command, const ExperimentConfig& config,
                             const CommandOptions& options);

/// Entry point. Returns the process exit status.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace locfuse
