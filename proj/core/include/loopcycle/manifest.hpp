#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace loopcycle {

// Experiment parameters as strings, exactly as given on the command line.
using Params = std::map<std::string, std::string>;

struct OutputDigest {
  std::string file;  // relative to the output directory
  std::string sha256;
  bool operator==(const OutputDigest&) const = default;
};

struct ExperimentManifest {
  std::string experiment;
  std::string status = "ok";  // "ok" or "aborted"
  Params params;              // effective values, defaults filled in
  std::uint64_t seed = 0;
  std::string seed_scheme;
  std::string version;
  std::string git_hash;
  std::vector<std::string> backends;
  double kappa = 0.0;  // 0 when the run opens no bridge edges
  std::map<std::string, std::string> conventions;
  std::vector<OutputDigest> outputs;

  std::string to_json() const;
  static ExperimentManifest from_json(const std::string& text);
  static ExperimentManifest read(const std::string& path);
};

// Names accepted by run_experiment.
std::vector<std::string> experiment_names();

// Runs `name`, writes its outputs into out_dir (created if needed) and always
// finishes with out_dir/manifest.json. Unknown parameter keys are rejected.
// An aborted run (rejection floor) still writes its report and manifest before
// the error propagates.
ExperimentManifest run_experiment(const std::string& name, const Params& params, const std::string& out_dir);

struct ReplayResult {
  ExperimentManifest original;
  ExperimentManifest replayed;
  std::vector<std::string> mismatched;  // files whose digests differ or are missing
  bool identical() const { return mismatched.empty(); }
};

// Re-runs the experiment recorded in a manifest into out_dir and compares digests.
ReplayResult replay_manifest(const std::string& manifest_path, const std::string& out_dir);

// LOOPCYCLE_OUT when set, otherwise "loopcycle-out".
std::string default_output_dir();

}  // namespace loopcycle
