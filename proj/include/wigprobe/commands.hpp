#pragma once

#include <filesystem>
#include <iosfwd>

#include "wigprobe/config.hpp"

namespace wigprobe {

/// Output layout under ExperimentConfig::output_dir:
///   config.yaml, manifest.json
///   data/library.json, data/probes/probe_NNN.csv
///   data/reference/aKK.{csv,json}, data/pdc.{csv,json}, data/states/mS_aKK.{csv,json}
///   results/fig3_parity.csv, fig4_idler_singles.csv, fig5_heralded_parity.csv, fig6_pn.csv,
///   results/fits.json, results/reconstructions/mS_aKK.json, results/manifest.json
///   figures/figures_long.csv, figures/fig{3,4,5,6}.svg
/// S indexes cfg.overlaps and KK indexes cfg.amps.
struct CommandOptions {
  unsigned threads = 0;        ///< 0: hardware concurrency
  std::ostream* log = nullptr;  ///< progress lines, if set
};

/// Probe library, reference beams, undisplaced source and displaced states,
/// plus the resolved config and a manifest of SHA-256 hashes.
void cmd_simulate(const ExperimentConfig& cfg, const CommandOptions& opt = {});

/// Calibration (displacements, r and eta, afterpulse line), pattern tomography
/// of every state record, heralding and parity curves.
void cmd_reconstruct(const ExperimentConfig& cfg, const CommandOptions& opt = {});

/// Tidy long-format CSV and one SVG per figure from the results tables.
void cmd_figures(const std::filesystem::path& out_dir);

/// Fast internal consistency checks; prints one PASS/FAIL line each and
/// returns the number of failures.
int cmd_selftest(std::ostream& out);

}  // namespace wigprobe
