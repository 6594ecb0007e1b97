// dspboard: batch driver for the board-emulation experiments.
//   dspboard bcm     --config cfg --out dir [--seed N]
//   dspboard ident   --config cfg --out dir [--seed N]
//   dspboard predict --config cfg --out dir [--seed N]
//   dspboard vme     --script s.txt --out dir
//   dspboard budget  <taps> <fir|iir> <rate_hz> [--na N]

#include <CLI11.hpp>

#include <optional>
#include <string>

#include "dspboard/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dual-DSP instrumentation board emulator"};
  app.require_subcommand(1);

  std::string config, out_dir = "out", script;
  std::optional<std::uint64_t> seed;

  const auto add_config_opts = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "experiment config file")->required();
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "override component seeds");
  };

  CLI::App* bcm = app.add_subcommand("bcm", "beam-current-monitor chain");
  add_config_opts(bcm);
  CLI::App* ident = app.add_subcommand("ident", "identification experiment");
  add_config_opts(ident);
  CLI::App* predict = app.add_subcommand("predict", "predictor (ALE) experiment");
  add_config_opts(predict);

  CLI::App* vme = app.add_subcommand("vme", "VME slave conformance script");
  vme->add_option("--script", script, "transaction script")->required();
  vme->add_option("--out", out_dir, "output directory");

  std::uint64_t taps = 0, na = 0;
  std::string topology;
  double rate = 0.0;
  CLI::App* budget = app.add_subcommand("budget", "MAC budget report");
  budget->add_option("taps", taps, "filter taps")->required();
  budget->add_option("topology", topology, "fir|iir")->required();
  budget->add_option("rate", rate, "sample rate (S/s)")->required();
  budget->add_option("--na", na, "IIR feedback taps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : dspboard::cli::kExitConfig;
  }

  if (bcm->parsed()) return dspboard::cli::cmd_bcm(config, out_dir, seed);
  if (ident->parsed()) return dspboard::cli::cmd_ident(config, out_dir, seed);
  if (predict->parsed()) return dspboard::cli::cmd_predict(config, out_dir, seed);
  if (vme->parsed()) return dspboard::cli::cmd_vme_conformance(script, out_dir);
  if (budget->parsed()) return dspboard::cli::cmd_budget(taps, topology, rate, na);
  return dspboard::cli::kExitConfig;
}
