#pragma once

#include <Eigen/Dense>
#include <string>

#include "spillover/config.hpp"
#include "spillover/network.hpp"

namespace spillover::cli {

/// Exit-code contract: 0 success, 1 verification failure, 2 input error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitInputError = 2;

/// Network plus its per-unit table (covariate, treatment, outcome).
struct DatasetBundle {
    ClusteredNetwork net;
    Eigen::VectorXd X;
    Eigen::VectorXd Z;
    Eigen::VectorXd Y;
};

/// Units table CSV: header "cluster_id,unit_id,x,z,y"; every network unit
/// must appear exactly once and z must be 0 or 1.
DatasetBundle load_bundle(const std::string& edge_file, const std::string& units_file);
void write_units(const DatasetBundle& bundle, const std::string& path);

/// Point estimates and intervals for the configured estimands; writes a JSON
/// report. Throws on input errors (callers map to exit code 2).
void run_estimate(const std::string& edge_file, const std::string& units_file,
                  const Config& config, const std::string& out_path);

/// Monte Carlo grid; writes the table CSV and returns the config hash.
std::uint64_t run_simulate(const Config& config, const std::string& out_path);

/// Identity verification suite; returns true when every identity holds.
/// inject_w_bug perturbs the treated-sender estimator weights by 1% to
/// demonstrate the checks have power.
bool run_verify(const Config& config, bool inject_w_bug, std::string* summary = nullptr);

}  // namespace spillover::cli
