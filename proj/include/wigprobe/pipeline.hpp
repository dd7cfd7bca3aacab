#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <vector>

#include "wigprobe/calib.hpp"
#include "wigprobe/config.hpp"
#include "wigprobe/patterns.hpp"

namespace wigprobe {

/// Runs fn(0..n-1) on up to `threads` workers (0: hardware concurrency).
/// Results must be written by index; the first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads = 0);

/// Seed of point `index` in curve `series`; independent of thread scheduling.
std::uint64_t point_seed(std::uint64_t master, std::uint64_t series, std::size_t index);

/// Record of the signal-displaced state at the detector, by physical Monte Carlo.
ClickRecord simulate_state(const ExperimentConfig& cfg, double overlap, double amp, std::uint64_t seed);

/// Record of the reference beam alone (coherent signal, vacuum idler).
ClickRecord simulate_reference(const ExperimentConfig& cfg, double amp, std::uint64_t seed);

/// Fit options for a record displaced by amp: the signal ladder follows
/// recommended_ladder, capped at the response ladder. Cross-mode afterpulsing
/// of `tmd` enters the fit when the spec asks for it.
FitOptions fit_options(const ReconstructionSpec& spec, double amp, int response_n_max, const Tmd& tmd);

Reconstruction reconstruct_record(const ClickRecord& rec, const ResponseEstimate& resp, const ReconstructionSpec& spec,
                                  const Tmd& tmd, double amp, std::uint64_t seed);

/// Parity of herald_signal(P, x) on the mean reconstruction; the std is taken
/// over replicas, skipping any replica with no heralding weight.
Estimate heralded_parity(const Reconstruction& rec, double x);

/// Heralded signal distribution: replica mean and elementwise std.
struct HeraldedDist {
  PhotonDist mean;
  std::vector<double> std;
};
HeraldedDist heralded_distribution(const Reconstruction& rec, double x);

double forward_two_mode_parity(const SourceParams& src, double amp, int n_max);
PhotonDist forward_heralded(const SourceParams& src, double amp, double x, int n_max);

enum class CurveMode { two_mode_displaced, heralded };

struct CurvePoint {
  double amp = 0.0;
  double parity = 0.0;  ///< reconstructed
  double std = 0.0;     ///< bootstrap std
  double forward = 0.0;             ///< noiseless forward model, no afterpulse correction
  double forward_afterpulse = 0.0;  ///< forward model heralded with x(amp); equals `forward` for two-mode curves
  Reconstruction rec;
};

/// Full chain per displacement: source, channels, detector, synthetic record,
/// pattern reconstruction, heralding if requested, parity. The forward-model
/// columns use the generating configuration. `ap` supplies x(amp) for
/// heralded curves (x = 0 without it). Point k of the curve uses
/// point_seed(cfg.seed, series, k).
std::vector<CurvePoint> parity_curve(const ExperimentConfig& cfg, const ResponseEstimate& resp,
                                     const std::vector<double>& amps, CurveMode mode, double overlap,
                                     const AfterpulseFit* ap = nullptr, std::uint64_t series = 0);

/// Probe library of the configured grid.
ProbeSet simulate_probes(const ExperimentConfig& cfg);

}  // namespace wigprobe
