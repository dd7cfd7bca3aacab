#pragma once

#include <complex>

#include <Eigen/Dense>

#include "wigprobe/fock.hpp"

namespace wigprobe {

/// Joint photon-number distribution P(m, n): rows are signal photons m,
/// columns idler photons n.
///
/// States are kept as classical joint distributions. This is exact for the
/// phase-averaged states handled here: the pump phase is never observed, so
/// only diagonal elements survive the average.
struct JointDist {
  Eigen::MatrixXd probs;
  double discarded = 0.0;

  JointDist() = default;
  explicit JointDist(Eigen::MatrixXd p, double discarded_mass = 0.0) : probs(std::move(p)), discarded(discarded_mass) {}

  int n_max_s() const { return static_cast<int>(probs.rows()) - 1; }
  int n_max_i() const { return static_cast<int>(probs.cols()) - 1; }
  double total() const { return probs.sum(); }

  PhotonDist signal_marginal() const;
  PhotonDist idler_marginal() const;

  static JointDist vacuum(int n_max);
  /// Independent modes, P(m, n) = s[m] i[n].
  static JointDist product(const PhotonDist& signal, const PhotonDist& idler);
};

void validate(const JointDist& p, double tail_tol = kTailTol);

/// Sum over (m, n) of (-1)^(m+n) P(m, n).
double joint_parity(const JointDist& p);

double total_variation(const JointDist& p, const JointDist& q);

/// Physical source and channel parameters.
struct SourceParams {
  double r = 0.6;           ///< squeezing parameter
  double eta_s = 0.75;      ///< signal coupling efficiency
  double eta_i = 0.75;      ///< idler coupling efficiency
  double overlap = 0.7;     ///< mode overlap M with the reference beam
  double splitter_t = 1.0;  ///< transmission of the displacement splitter (amplitudes are referred to the TMD input)

  double lambda() const;
  void validate() const;
  bool operator==(const SourceParams&) const = default;
};

/// Lossless two-mode squeezed vacuum: P(n, n) = (1 - lambda^2) lambda^(2n), lambda = tanh r.
JointDist tmsv_joint(double r, int n_max, double tail_tol = kTailTol);

/// Independent binomial loss on each mode.
JointDist apply_joint_loss(const JointDist& p, double eta_s, double eta_i);

/// Column-stochastic map on one mode: splitter loss (1 - splitter_t), then
/// displacement by sqrt(overlap) * amp, then convolution with
/// Poisson((1 - overlap) amp^2) for the part of the reference that misses
/// the mode. Acts on ladder 0..n_max.
Eigen::MatrixXd displacement_channel(double amp, double overlap, double splitter_t, int n_max,
                                     double tail_tol = kTailTol);

/// Applies displacement_channel to each idler column of P (signal index).
JointDist displace_signal(const JointDist& p, double amp, double overlap, double splitter_t,
                          double tail_tol = kTailTol);

/// Mirror of displace_signal acting on the idler index.
JointDist displace_idler(const JointDist& p, double amp, double overlap, double splitter_t,
                         double tail_tol = kTailTol);

/// Lossy, displaced state as measured at the TMD input. Amplitudes are signal
/// and idler displacements (idler usually 0).
JointDist prepare_state(const SourceParams& src, double amp_s, double amp_i, int n_max,
                        double tail_tol = kTailTol);

/// Two-mode Wigner function of the squeezed vacuum at pump phase phi:
///   (4/pi^2) exp(-e^{2r}|a + b* e^{-i phi}|^2 - e^{-2r}|a - b* e^{-i phi}|^2).
double wigner_tmsv_analytic(std::complex<double> alpha, std::complex<double> beta, double r, double phi);

/// Pump-phase average of wigner_tmsv_analytic:
///   (4/pi^2) exp[-2 cosh(2r)(|a|^2 + |b|^2)] I0(4 sinh(2r)|a||b|).
double wigner_avg_analytic(double abs_alpha, double abs_beta, double r);

/// Modified Bessel function I0: power series below 20, asymptotic expansion above.
double bessel_i0(double x);

/// e^{-|x|} I0(x), finite for any argument.
double bessel_i0_scaled(double x);

}  // namespace wigprobe
