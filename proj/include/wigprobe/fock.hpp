#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "wigprobe/errors.hpp"

namespace wigprobe {

/// Default truncation tolerance for every Fock-ladder operation.
inline constexpr double kTailTol = 1e-10;

/// Default Fock ladder: a coherent state of |alpha| = 3.5 (mean 12.25) leaves < 1e-10 above it.
inline constexpr int kDefaultNMax = 60;

/// Photon-number distribution on the truncated ladder 0..n_max.
///
/// `discarded` accumulates the mass that operations pushed past the end of
/// the ladder. Distributions are never silently renormalized.
struct PhotonDist {
  std::vector<double> probs;
  double discarded = 0.0;

  PhotonDist() = default;
  explicit PhotonDist(std::vector<double> p, double discarded_mass = 0.0)
      : probs(std::move(p)), discarded(discarded_mass) {}

  int n_max() const { return static_cast<int>(probs.size()) - 1; }
  double operator[](int n) const { return n >= 0 && n <= n_max() ? probs[n] : 0.0; }
  double total() const;
  double mean() const;

  static PhotonDist vacuum(int n_max);
  static PhotonDist fock(int n, int n_max);
};

/// Throws ConfigError unless `p` is a valid distribution: entries >= 0 and
/// total mass in [1 - tail_tol, 1 + 1e-12].
void validate(const PhotonDist& p, double tail_tol = kTailTol);

/// Poisson(mean) on 0..n_max. The tail beyond n_max is reported in `discarded`.
/// Throws TruncationError if that tail is >= tail_tol.
PhotonDist poisson_dist(double mean, int n_max, double tail_tol = kTailTol);

/// Binomial thinning matrix L(m, n) = C(n, m) eta^m (1 - eta)^(n - m), lower triangular.
Eigen::MatrixXd loss_matrix(double eta, int n_max);

/// Pure-loss channel with transmission eta. Mass is preserved exactly.
PhotonDist loss_channel(const PhotonDist& p, double eta);

/// Moduli squared of displacement matrix elements, |<n|D(amp)|k>|^2.
///
/// Only phase-averaged (diagonal) states are displaced anywhere in this
/// library, so the complex amplitudes are never needed.
struct DisplacementKernel {
  double amp = 0.0;
  Eigen::MatrixXd k;                 ///< k(n, col) for n, col in 0..n_max
  std::vector<double> column_mass;   ///< sum over n of k(n, col)
  /// Columns 0..audited_columns-1 keep at least 1 - tail_tol of their mass on the ladder.
  int audited_columns = 0;

  int n_max() const { return static_cast<int>(k.rows()) - 1; }
};

/// Builds the kernel from the associated-Laguerre closed form
///   K(n,k) = e^{-x} x^{|n-k|} (min! / max!) [L_min^{|n-k|}(x)]^2,  x = amp^2,
/// with an upward recurrence in the Laguerre degree (rescaled for x > 8).
/// Columns whose displaced mass leaks past n_max are recorded, not rejected;
/// throws TruncationError only when even the vacuum column leaks >= tail_tol.
DisplacementKernel displacement_kernel(double amp, int n_max, double tail_tol = kTailTol);

/// out[n] = sum_k K(n,k) p[k]. Throws TruncationError when the mass lost
/// past the ladder reaches 10 * tail_tol.
PhotonDist apply_displacement(const PhotonDist& p, const DisplacementKernel& kern,
                              double tail_tol = kTailTol);

/// Discrete convolution (distribution of the sum of independent photon numbers),
/// truncated at `n_max` (default: the larger input ladder). Throws
/// TruncationError if the truncated mass is >= tail_tol.
PhotonDist convolve(const PhotonDist& p, const PhotonDist& q, int n_max = -1,
                    double tail_tol = kTailTol);

/// Expectation of (-1)^n.
double parity(const PhotonDist& p);

/// Half the L1 distance; entries missing from the shorter ladder count as 0.
double total_variation(const PhotonDist& p, const PhotonDist& q);

/// Copy of p cut (or zero-padded) to a new ladder; dropped mass goes to
/// `discarded`. Throws TruncationError if the dropped mass is >= tail_tol.
PhotonDist truncate(const PhotonDist& p, int n_max, double tail_tol = kTailTol);

}  // namespace wigprobe
