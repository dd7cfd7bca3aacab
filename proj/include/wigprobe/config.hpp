#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wigprobe/patterns.hpp"
#include "wigprobe/source.hpp"
#include "wigprobe/tmd.hpp"

namespace wigprobe {

struct ProbeGridSpec {
  int n_s = 71;
  double max_s = 3.5;
  int n_i = 9;
  double max_i = 3.5;
  std::uint64_t shots = 1000000;  ///< per probe and mode

  bool operator==(const ProbeGridSpec&) const = default;
};

struct ReconstructionSpec {
  int n_patterns = 100;
  int n_boot = 20;
  int n_i = 4;  ///< idler ladder; the signal ladder follows the displacement
  PatternSelection selection = PatternSelection::frequency_weighted;
  PatternWeighting weighting = PatternWeighting::poisson;
  int response_n_max = 40;
  bool model_cross_mode = true;  ///< fold the detector's cross-mode afterpulsing into the fit

  bool operator==(const ReconstructionSpec&) const = default;
};

/// Everything a simulate / reconstruct run needs. The source overlap is not
/// read from `source`; every entry of `overlaps` gives one series.
struct ExperimentConfig {
  SourceParams source;
  DetectorParams detector_s;
  DetectorParams detector_i;
  bool cross_mode_afterpulse = true;
  int n_max = kDefaultNMax;
  std::uint64_t shots = 1000000;
  std::uint64_t seed = 1;
  std::vector<double> amps{0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0};
  std::vector<double> pn_amps{0.5, 1.0, 2.0};  ///< displacements shown as photon-number tables
  std::vector<double> overlaps{0.7, 0.0};
  ProbeGridSpec probe_grid;
  ReconstructionSpec reconstruction;
  std::string output_dir = "out";

  Tmd tmd() const { return Tmd{detector_s, detector_i, cross_mode_afterpulse}; }
  SourceParams source_at(double overlap) const;

  /// Throws ConfigError naming the offending field, e.g. "detector_s.eta_d: ...".
  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

/// YAML text with units in comments.
std::string serialize(const ExperimentConfig& cfg);

/// Parses YAML; missing keys keep their defaults, unknown keys are errors.
/// Throws ConfigError with the field path on any problem, then validates.
ExperimentConfig parse_config(const std::string& text);

ExperimentConfig load_config(const std::string& path);

}  // namespace wigprobe
