#include "dspboard/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "dspboard/apps.hpp"
#include "dspboard/kernels.hpp"
#include "dspboard/vme.hpp"

namespace dspboard::cli {

namespace fs = std::filesystem;

int log_level() {
  const char* env = std::getenv("BOARD_SIM_LOG");
  return env ? std::atoi(env) : 0;
}

void log(int level, const std::string& msg) {
  if (log_level() >= level) std::fprintf(stderr, "[dspboard] %s\n", msg.c_str());
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw apps::ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const std::string& config_path,
                    std::optional<std::uint64_t> seed_override,
                    const std::string& config_text) {
  std::ofstream m(out_dir / "manifest.txt");
  m << "command = " << command << "\n";
  m << "config = " << config_path << "\n";
  m << "out = " << out_dir.string() << "\n";
  m << "seed_override = "
    << (seed_override ? std::to_string(*seed_override) : std::string("none"))
    << "\n";
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  m << "timestamp = " << (epoch ? epoch : "unset") << "\n";
  m << "kernel_backend = "
    << kernels::backend_name(kernels::active_backend()) << "\n";
  m << "[config]\n" << config_text;
}

// Minimal flat key = value reader for the ident/predict configs.
struct FlatConfig {
  std::map<std::string, std::string> kv;
  std::string section;

  const std::string& get(const std::string& key) const {
    const auto it = kv.find(key);
    if (it == kv.end()) throw apps::ConfigError("config: missing key '" + key + "'");
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& dflt) const {
    const auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  }
  bool has(const std::string& key) const { return kv.count(key) != 0; }
};

FlatConfig read_flat(const std::string& text, const std::string& expect_section) {
  FlatConfig cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.front() == '[') {
      cfg.section = first.substr(1, first.size() - 2);
      if (cfg.section != expect_section)
        throw apps::ConfigError("config: expected section [" + expect_section +
                                "], found [" + cfg.section + "]");
      continue;
    }
    std::string eq, rest;
    if (!(ls >> eq) || eq != "=")
      throw apps::ConfigError("config: line " + std::to_string(line_no) +
                              ": expected 'key = value'");
    std::getline(ls, rest);
    const auto start = rest.find_first_not_of(" \t");
    rest = start == std::string::npos ? "" : rest.substr(start);
    const auto end = rest.find_last_not_of(" \t\r");
    if (end != std::string::npos) rest.erase(end + 1);
    cfg.kv[first] = rest;
  }
  return cfg;
}

double num(const FlatConfig& c, const std::string& key) {
  try {
    return std::stod(c.get(key));
  } catch (const apps::ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw apps::ConfigError("config: key '" + key + "' is not a number");
  }
}

std::uint64_t unum(const FlatConfig& c, const std::string& key) {
  try {
    return std::stoull(c.get(key), nullptr, 0);
  } catch (const apps::ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw apps::ConfigError("config: key '" + key + "' is not an integer");
  }
}

std::vector<double> num_list(const FlatConfig& c, const std::string& key) {
  std::istringstream vs(c.get(key));
  std::vector<double> out;
  for (double v; vs >> v;) out.push_back(v);
  if (out.empty())
    throw apps::ConfigError("config: key '" + key + "' needs numbers");
  return out;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + p.string());
}

int run_guarded(const std::string& command, const std::string& config_path,
                const std::string& out_dir,
                const std::function<void(const std::string& config_text,
                                         const fs::path& out)>& body) {
  std::string config_text;
  try {
    config_text = slurp(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dspboard %s: %s\n", command.c_str(), e.what());
    return kExitConfig;
  }
  try {
    const fs::path out(out_dir);
    ensure_dir(out);
    body(config_text, out);
    return kExitOk;
  } catch (const apps::ConfigError& e) {
    std::fprintf(stderr, "dspboard %s: %s\n", command.c_str(), e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dspboard %s: runtime error: %s\n", command.c_str(),
                 e.what());
    return kExitRuntime;
  }
}

}  // namespace

int cmd_bcm(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override) {
  return run_guarded("bcm", config_path, out_dir, [&](const std::string& text,
                                                      const fs::path& out) {
    std::istringstream in(text);
    apps::BcmExperiment exp = apps::parse_experiment(in);
    if (seed_override) apps::override_seeds(exp.signal, *seed_override);
    log(1, "bcm: running experiment from " + config_path);

    const apps::BcmReport rep = apps::run_bcm_experiment(exp);

    {
      std::ofstream f(out / "report.csv");
      apps::write_report_csv(rep, f);
    }
    adaptive::write_run_csv(rep.seen, rep.run, (out / "run.csv").string());
    {
      std::ofstream f(out / "summary.txt");
      f << apps::format_summary(rep);
    }
    write_manifest(out, "bcm", config_path, seed_override, text);
    log(1, "bcm: improvement " + std::to_string(rep.improvement_db) + " dB");
  });
}

int cmd_ident(const std::string& config_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed_override) {
  return run_guarded("ident", config_path, out_dir, [&](const std::string& text,
                                                        const fs::path& out) {
    const FlatConfig c = read_flat(text, "ident");
    adaptive::LmsConfig lms;
    lms.num_taps = unum(c, "taps");
    lms.mu = num(c, "mu");
    if (c.has("normalized")) lms.normalized = c.get("normalized") == "true";
    if (c.has("leakage")) lms.leakage = num(c, "leakage");
    if (c.has("snapshot_stride")) lms.snapshot_stride = unum(c, "snapshot_stride");
    const auto samples = unum(c, "samples");
    const auto seed = seed_override.value_or(unum(c, "seed"));
    const double rate = c.has("rate_hz") ? num(c, "rate_hz") : 333000.0;
    const double sigma = c.has("noise_sigma") ? num(c, "noise_sigma") : 1.0;
    const std::vector<double> plant = num_list(c, "plant");

    signal::SignalSpec in_spec;
    in_spec.duration_s = (static_cast<double>(samples) + 0.5) / rate;
    in_spec.rate_hz = rate;
    in_spec.components.push_back(signal::WhiteNoise{sigma, seed});
    const signal::SampleStream input = signal::synthesize(in_spec);

    signal::SampleStream desired;
    desired.rate_hz = rate;
    desired.samples.assign(input.size(), 0.0);
    for (std::size_t k = 0; k < input.size(); ++k)
      for (std::size_t i = 0; i < plant.size() && i <= k; ++i)
        desired.samples[k] += plant[i] * input.samples[k - i];

    const adaptive::AdaptiveRun run =
        adaptive::run_identification(input, desired, lms, {});

    adaptive::write_run_csv(input, run, (out / "run.csv").string());
    adaptive::write_coefficients_csv(run.final.b, (out / "coeffs.csv").string());

    double worst = 0.0;
    for (std::size_t i = 0; i < lms.num_taps; ++i) {
      const double h = i < plant.size() ? plant[i] : 0.0;
      worst = std::max(worst, std::fabs(run.final.b[i] - h));
    }
    {
      std::ofstream f(out / "summary.txt");
      char buf[256];
      std::snprintf(buf, sizeof buf,
                    "identification summary\n"
                    "  samples          : %llu\n"
                    "  taps             : %zu\n"
                    "  max |b - h|      : %.6g\n",
                    static_cast<unsigned long long>(samples), lms.num_taps, worst);
      f << buf;
    }
    write_manifest(out, "ident", config_path, seed_override, text);
    log(1, "ident: max coefficient error " + std::to_string(worst));
  });
}

int cmd_predict(const std::string& config_path, const std::string& out_dir,
                std::optional<std::uint64_t> seed_override) {
  return run_guarded("predict", config_path, out_dir, [&](const std::string& text,
                                                          const fs::path& out) {
    const FlatConfig c = read_flat(text, "predict");
    adaptive::PredictorConfig cfg;
    cfg.lms.num_taps = unum(c, "taps");
    cfg.lms.mu = num(c, "mu");
    cfg.lms.normalized = c.get_or("normalized", "true") == "true";
    if (c.has("leakage")) cfg.lms.leakage = num(c, "leakage");
    if (c.has("eps")) cfg.lms.eps = num(c, "eps");
    cfg.delay = unum(c, "delay");
    const auto samples = unum(c, "samples");
    const double rate = c.has("rate_hz") ? num(c, "rate_hz") : 333000.0;
    const double freq_ratio = num(c, "freq_ratio");
    const double amplitude = c.has("amplitude") ? num(c, "amplitude") : 1.0;
    const double sigma = c.has("noise_sigma") ? num(c, "noise_sigma") : 0.0;
    const auto seed = seed_override.value_or(
        c.has("seed") ? unum(c, "seed") : 0);

    signal::SignalSpec spec;
    spec.duration_s = (static_cast<double>(samples) + 0.5) / rate;
    spec.rate_hz = rate;
    spec.components.push_back(signal::Sinusoid{freq_ratio * rate, amplitude, 0.0});
    signal::SignalSpec clean_spec = spec;
    if (sigma > 0.0) spec.components.push_back(signal::WhiteNoise{sigma, seed});

    const signal::SampleStream input = signal::synthesize(spec);
    const signal::SampleStream clean = signal::synthesize(clean_spec);

    const adaptive::AdaptiveRun run = adaptive::run_predictor(input, cfg, {});

    adaptive::write_run_csv(input, run, (out / "run.csv").string());
    adaptive::write_coefficients_csv(run.final.b, (out / "coeffs.csv").string());

    const double in_snr = apps::snr_tail(clean, input, 0.5).snr_db;
    const double out_snr = apps::snr_tail(clean, run.y, 0.5).snr_db;
    {
      std::ofstream f(out / "summary.txt");
      char buf[320];
      std::snprintf(buf, sizeof buf,
                    "predictor summary\n"
                    "  samples        : %llu\n"
                    "  taps           : %zu\n"
                    "  input SNR      : %.3f dB\n"
                    "  output SNR     : %.3f dB\n"
                    "  improvement    : %.3f dB\n",
                    static_cast<unsigned long long>(samples), cfg.lms.num_taps,
                    in_snr, out_snr, out_snr - in_snr);
      f << buf;
    }
    write_manifest(out, "predict", config_path, seed_override, text);
    log(1, "predict: improvement " + std::to_string(out_snr - in_snr) + " dB");
  });
}

int cmd_vme_conformance(const std::string& script_path,
                        const std::string& out_dir) {
  std::string script_text;
  try {
    script_text = slurp(script_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dspboard vme: %s\n", e.what());
    return kExitConfig;
  }
  std::vector<vme::ScriptStep> script;
  try {
    std::istringstream in(script_text);
    script = vme::parse_script(in);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dspboard vme: %s\n", e.what());
    return kExitConfig;
  }
  try {
    const fs::path out(out_dir);
    ensure_dir(out);

    // Slave window over a fresh board: DPRAM at 0x0..0x1FFFF, I/O registers
    // at 0x20000..0x2000F.
    board::Board brd;
    apps::BoardVmeBacking backing(brd);
    vme::SlaveState slave;
    slave.decoded_base = 0;
    slave.window_bytes = 2 * static_cast<std::uint32_t>(backing.words());
    slave.backing = &backing;

    const vme::ConformanceReport report = vme::run_conformance(slave, script);
    {
      std::ofstream f(out / "report.csv");
      vme::write_report_csv(report, f);
    }
    write_manifest(out, "vme", script_path, std::nullopt, script_text);
    std::printf("vme conformance: %zu steps, %zu failures\n",
                report.entries.size(), report.failures);
    return report.all_passed() ? kExitOk : kExitConformanceFail;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dspboard vme: runtime error: %s\n", e.what());
    return kExitRuntime;
  }
}

int cmd_budget(std::uint64_t taps, const std::string& topology, double rate_hz,
               std::uint64_t na) {
  dualcore::FilterKind kind;
  if (topology == "fir") kind = dualcore::FilterKind::fir;
  else if (topology == "iir") kind = dualcore::FilterKind::iir;
  else {
    std::fprintf(stderr, "dspboard budget: topology must be fir or iir\n");
    return kExitConfig;
  }
  try {
    const dualcore::MacBudget b = dualcore::mac_budget(taps, kind, rate_hz, na);
    std::printf("taps            : %llu\n", static_cast<unsigned long long>(taps));
    std::printf("topology        : %s\n", topology.c_str());
    std::printf("%s", dualcore::format_budget(b).c_str());
    return kExitOk;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "dspboard budget: %s\n", e.what());
    return kExitConfig;
  }
}

}  // namespace dspboard::cli
