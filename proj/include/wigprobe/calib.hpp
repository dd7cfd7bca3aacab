#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wigprobe/patterns.hpp"
#include "wigprobe/source.hpp"
#include "wigprobe/tmd.hpp"

namespace wigprobe {

/// Amplitude whose probe zero-click probability matches `zero_click_prob`.
/// Fits log p0 = a - b amp^2 to the probes of one mode (0 signal, 1 idler,
/// using probes with no light in the other mode when there are any) by least
/// squares weighted with the binomial variance of log p0 (unweighted for
/// exact probes) and inverts the line. Throws DataError when the probability lies
/// outside the range spanned by the probes.
double estimate_displacement(double zero_click_prob, const ProbeSet& probes, int mode = 0);

/// Fraction of shots whose given mode has no clicked bin.
double zero_click_fraction(const ClickRecord& rec, const Tmd& tmd, int mode = 0);

struct SourceFit {
  double r_hat = 0.0;
  double eta_hat = 0.0;
  double eta_i_hat = 0.0;  ///< equals eta_hat unless the asymmetric fit is used
  double fit_residual = 0.0;  ///< deviance G^2 at the optimum
  bool on_boundary = false;
  bool eta_unidentified = false;
  int evaluations = 0;
};

struct SourceFitOptions {
  double r_min = 0.0;
  double r_max = 0.9;  ///< keeps the squeezed-vacuum tail inside the detector photon cap
  double eta_min = 0.0;
  double eta_max = 1.0;
  int coarse_r = 31;
  int coarse_eta = 21;
  int refine_points = 11;
  int refinements = 2;
  bool asymmetric_eta = false;  ///< fit eta_s and eta_i separately (eta_i on the same grid)
};

/// Multinomial deviance G^2 = 2 sum_k n_k log(n_k / (N q_k)) of a record
/// against a model pattern distribution. Model probabilities are floored at
/// 1e-300 so patterns the model forbids give a large finite penalty.
double pattern_deviance(const ClickRecord& rec, const PatternDist& model);

/// Forward-model pattern distribution of the undisplaced lossy squeezed vacuum.
PatternDist source_patterns(double r, double eta_s, double eta_i, const Tmd& tmd);

/// Grid search for (r, eta) minimising pattern_deviance against source_patterns.
/// Coarse grid coarse_r x coarse_eta over the box, then `refinements` passes of
/// refine_points^2 points spanning one previous step either side of the best
/// point. Ties go to the first point in row-major order, so the search is
/// deterministic. `on_boundary` is set when the optimum sits on the box edge;
/// `eta_unidentified` when G^2 at r_hat varies by less than 1 over eta.
SourceFit fit_source(const ClickRecord& rec, const Tmd& tmd, const SourceFitOptions& opt = {});

struct AfterpulseFit {
  double c = 0.0;  ///< singles rate at amp = 0, per shot
  double s = 0.0;  ///< slope per shot per amp^2
  double r_squared = 0.0;
  std::string warning;  ///< set when the fitted slope is negative

  /// Afterpulse share of idler single detections, s amp^2 / (c + s amp^2), clamped to [0, 1).
  double x(double amp) const;
};

/// Ordinary least-squares line through (amp^2, idler singles rate).
/// Throws DataError with fewer than 3 points or no spread in amp^2.
AfterpulseFit fit_afterpulse(const std::vector<std::pair<double, double>>& singles);

/// Fraction of shots with exactly one clicked idler bin.
double idler_singles_rate(const ClickRecord& rec, const Tmd& tmd);

/// Signal distribution after an idler single detection with afterpulse share x:
///   h[m] = (1 - x) P[m][1] + x delta_{m,1} sum_n P[1][n], normalised.
/// "Single detection" means exactly one photon here. Throws NumericalError
/// when the heralding weight is zero.
PhotonDist herald_signal(const JointDist& p, double x);

/// Click-level heralding: distribution of the number of clicked signal bins
/// over shots with exactly one clicked idler bin. Throws DataError when no
/// shot heralds.
PhotonDist herald_from_record(const ClickRecord& rec, const Tmd& tmd);

enum class WignerConvention { two_mode, single_mode };

/// Parity to Wigner value: two-mode 4 S / pi^2, single-mode 2 S / pi.
double wigner_point(double parity_value, WignerConvention convention = WignerConvention::two_mode);

/// Gaussian y = A exp(-x^2 / (2 var)) fitted by least squares on log y.
/// Points with y <= 0 are skipped; throws NumericalError with fewer than 2 left.
struct GaussianFit {
  double amplitude = 0.0;
  double variance = 0.0;
};
GaussianFit fit_gaussian(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace wigprobe
