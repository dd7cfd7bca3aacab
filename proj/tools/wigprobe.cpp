// wigprobe: simulate, reconstruct and plot the direct Wigner sampling experiment.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "wigprobe/commands.hpp"
#include "wigprobe/config.hpp"
#include "wigprobe/errors.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> shots;
  std::string out;
  std::optional<double> overlap;
  bool no_afterpulse = false;
  unsigned threads = 0;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "YAML experiment config");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--shots", f.shots, "shots per state record");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--overlap", f.overlap, "run a single overlap M instead of the configured list");
  cmd->add_flag("--no-afterpulse", f.no_afterpulse, "set p_ap = 0 in both detector modes");
  cmd->add_option("--threads", f.threads, "worker threads (0: all cores)");
  cmd->add_flag("-q,--quiet", f.quiet, "no progress lines");
}

wigprobe::ExperimentConfig resolve(const Flags& f, bool prefer_output_config) {
  using wigprobe::ExperimentConfig;
  ExperimentConfig cfg;
  if (!f.config.empty()) {
    cfg = wigprobe::load_config(f.config);
  } else if (prefer_output_config) {
    // reconstruct reuses the config that simulate resolved.
    const auto saved = std::filesystem::path(f.out.empty() ? cfg.output_dir : f.out) / "config.yaml";
    if (std::filesystem::exists(saved)) cfg = wigprobe::load_config(saved.string());
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.shots) {
    if (*f.shots < 1) throw wigprobe::ConfigError("shots: must be >= 1");
    cfg.shots = static_cast<std::uint64_t>(*f.shots);
  }
  if (!f.out.empty()) cfg.output_dir = f.out;
  if (f.overlap) cfg.overlaps = {*f.overlap};
  if (f.no_afterpulse) {
    cfg.detector_s.p_ap = 0.0;
    cfg.detector_i.p_ap = 0.0;
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Direct Wigner sampling with a time-multiplexed detector"};
  app.require_subcommand(1);
  Flags flags;
  auto* sim = app.add_subcommand("simulate", "probe library, reference beams, source and displaced-state records");
  auto* rec = app.add_subcommand("reconstruct", "calibration, pattern tomography and parity tables");
  auto* fig = app.add_subcommand("figures", "long-format CSV and SVG plots of the result tables");
  auto* st = app.add_subcommand("selftest", "fast internal consistency checks");
  add_common(sim, flags);
  add_common(rec, flags);
  std::string fig_out = wigprobe::ExperimentConfig{}.output_dir;
  fig->add_option("--out", fig_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    wigprobe::CommandOptions opt;
    opt.threads = flags.threads;
    opt.log = flags.quiet ? nullptr : &std::cerr;
    if (*sim) {
      wigprobe::cmd_simulate(resolve(flags, false), opt);
    } else if (*rec) {
      wigprobe::cmd_reconstruct(resolve(flags, true), opt);
    } else if (*fig) {
      wigprobe::cmd_figures(fig_out);
    } else if (*st) {
      return wigprobe::cmd_selftest(std::cout) == 0 ? 0 : 4;
    }
  } catch (const wigprobe::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const wigprobe::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const wigprobe::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
