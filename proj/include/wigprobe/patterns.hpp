#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wigprobe/source.hpp"
#include "wigprobe/tmd.hpp"

namespace wigprobe {

/// One two-mode coherent probe. Only the per-mode pattern marginals are kept:
/// the reconstruction uses per-mode responses, and joint tables for hundreds
/// of probes would be large.
struct Probe {
  double amp_s = 0.0;
  double amp_i = 0.0;
  std::uint64_t shots = 0;  ///< 0 for exact (noiseless) frequencies
  std::vector<double> freq_s;
  std::vector<double> freq_i;
};

struct ProbeSet {
  Tmd tmd;
  std::vector<Probe> probes;

  void validate() const;
};

/// Near-uniform factorised grid: n_s signal amplitudes in [0, max_s] times
/// n_i idler amplitudes in [0, max_i].
std::vector<std::pair<double, double>> probe_grid(int n_s, double max_s, int n_i, double max_i);

/// Pattern frequencies of Poisson(amp_s^2) x Poisson(amp_i^2) through the
/// detector model, then drawn with `shots` samples per mode (shots = 0 keeps
/// the exact probabilities). Probe k draws from streams 2k and 2k+1 of `seed`.
ProbeSet build_probe_library(const std::vector<std::pair<double, double>>& amps, const Tmd& tmd,
                             std::uint64_t shots, std::uint64_t seed, int n_max = kDefaultNMax);

struct ResponseOptions {
  double sv_cutoff = 1e-8;    ///< relative singular-value cutoff
  int penalty_order = 6;      ///< order of the difference operator in the ridge penalty
  std::vector<double> ridge_grid;  ///< empty: 1e-16 .. 1e-2 in decades
};

/// Estimated per-mode response, T(pattern, n) for n = 0..n_max.
struct ResponseEstimate {
  Eigen::MatrixXd t;
  double ridge = 0.0;
  double smallest_sv = 0.0;  ///< smallest singular value of the Poisson design, relative to the largest
  int rank = 0;
  int bins = 0;

  int n_max() const { return static_cast<int>(t.cols()) - 1; }
};

/// Solves probe_freq = sum_n Poisson(amp^2)[n] T(., n) for one mode (0 signal,
/// 1 idler) by Tikhonov least squares with a difference penalty, choosing the
/// weight at the corner of the L-curve, then projects every column onto the
/// simplex. Throws NumericalError, naming the smallest singular value, when
/// the probes have fewer than n_max + 1 distinct amplitudes in that mode.
ResponseEstimate estimate_response(const ProbeSet& probes, int n_max, int mode, const ResponseOptions& opt = {});

/// One response for both modes of a shared detector: signal marginals of
/// every probe plus idler marginals of the probes with no signal light
/// (those are free of cross-mode afterpulses).
ResponseEstimate estimate_shared_response(const ProbeSet& probes, int n_max, const ResponseOptions& opt = {});

enum class PatternSelection { uniform, frequency_weighted };

/// Row weights of the pattern fit. `poisson` divides each row by the shot-noise
/// scale of its frequency, sqrt(q / N), with q re-estimated from the fit.
enum class PatternWeighting { none, poisson };

struct FitOptions {
  int n_patterns = 100;
  int n_boot = 20;
  int n_s = 8;  ///< reconstruction ladder, signal
  int n_i = 6;  ///< reconstruction ladder, idler
  PatternSelection selection = PatternSelection::frequency_weighted;
  PatternWeighting weighting = PatternWeighting::none;
  int reweight_passes = 2;     ///< model-based weight updates after the first fit (poisson weighting)
  bool resample_shots = true;  ///< each replica also redraws the record
  double min_trace = 0.98;
  int max_retries = 10;
  /// When set, the Fock-space fit folds in this detector's cross-mode
  /// afterpulsing (see cross_mode_kernel) on top of the per-mode responses.
  std::optional<Tmd> cross_mode;
};

struct Reconstruction {
  JointDist p;
  Eigen::MatrixXd bootstrap_std;
  double residual = 0.0;  ///< RMS pattern residual over every observed pattern
  int n_patterns_used = 0;
  double trace = 0.0;     ///< mean sum of P before renormalisation
  std::vector<JointDist> replicas;
};

/// Ladder needed for a signal displaced by amp on top of a weak source.
int recommended_ladder(double amp);

/// Fock-space route: for each bootstrap replica, draws n_patterns observed
/// patterns and solves min ||f_S - A_S vec(P)|| with P >= 0 and sum P <= 1,
/// A(s | i, (m, n)) = T_s(s, m) T_i(i, n), or with opt.cross_mode
///   sum_x K(x | s) T_s(s, m) sum_{i' : i' | x = i} T_i(i', n). Returns the replica mean, the
/// elementwise replica std, and the replicas. Fails when the mean trace is
/// below min_trace, otherwise renormalises.
Reconstruction fit_state(const ClickRecord& record, const ResponseEstimate& signal, const ResponseEstimate& idler,
                         const FitOptions& opt, std::uint64_t seed);

/// Probe-space route: fits the record as a nonnegative mixture of probe
/// patterns (product of the stored marginals), then maps the weights to
/// P = sum_j c_j Poisson(amp_s^2) x Poisson(amp_i^2) on the reconstruction ladder.
Reconstruction fit_state_mixture(const ClickRecord& record, const ProbeSet& probes, const FitOptions& opt,
                                 std::uint64_t seed);

struct Estimate {
  double value = 0.0;
  double std = 0.0;
};

/// Sum of (-1)^(m+n) P(m, n); std over bootstrap replicas.
Estimate parity_from_reconstruction(const Reconstruction& rec);

/// Any functional of the joint distribution, with its std over replicas.
Estimate functional_estimate(const Reconstruction& rec, const std::function<double(const JointDist&)>& f);

}  // namespace wigprobe
