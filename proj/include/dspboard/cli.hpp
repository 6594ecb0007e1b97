#pragma once

#include <cstdint>
#include <optional>
#include <string>

// Batch command front ends. Every command writes a manifest.txt next to its
// outputs capturing the command, config, seeds, and the resolved inputs, so
// a run can be reproduced byte-for-byte. Exit codes: 0 success, 1 conformance
// expectations failed, 2 usage/config error, 3 runtime error.
//
// Environment: BOARD_SIM_LOG=1|2 writes progress to stderr;
// SOURCE_DATE_EPOCH, when set, is recorded as the manifest timestamp
// (otherwise the field reads "unset" so fixed-seed runs stay byte-identical).

namespace dspboard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConformanceFail = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

int log_level();
void log(int level, const std::string& msg);

/// BCM chain: writes report.csv, run.csv (k,x,y,e), summary.txt, manifest.txt.
int cmd_bcm(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override);

/// Identification experiment: run.csv, coeffs.csv, summary.txt, manifest.txt.
int cmd_ident(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override);

/// Predictor (ALE) experiment: run.csv, coeffs.csv, summary.txt, manifest.txt.
int cmd_predict(const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override);

/// VME conformance script: report.csv, manifest.txt. Exit 1 when any
/// expectation fails.
int cmd_vme_conformance(const std::string& script_path,
                        const std::string& out_dir);

/// Print the MAC budget table for taps/topology/rate. topology: fir|iir.
int cmd_budget(std::uint64_t taps, const std::string& topology, double rate_hz,
               std::uint64_t na);

}  // namespace dspboard::cli
