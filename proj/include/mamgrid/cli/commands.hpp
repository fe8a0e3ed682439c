#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mamgrid/mam/network.hpp"
#include "mamgrid/training/config.hpp"

namespace mamgrid::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Invalid command line or configuration (exit status 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a training run needs; written verbatim into the output
/// directory so `train --config <out>/config.json` repeats the run.
struct RunConfig {
  std::string case_path;
  std::string interfaces_path;
  std::string tasks_path;    // optional; empty means one task per interface
  std::string scenario_dir;  // holds train.json and test.json
  std::string output_dir;
  mam::ModelConfig model;
  training::TrainConfig train;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& doc);
  /// Throws UsageError when a referenced input path does not exist.
  void validate_paths() const;
};

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mamgrid::cli
