#include "wigprobe/source.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace wigprobe {

namespace {

void require_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
}

PhotonDist to_dist(const Eigen::VectorXd& v) { return PhotonDist(std::vector<double>(v.data(), v.data() + v.size())); }

double apply_leak(const Eigen::MatrixXd& channel, const Eigen::VectorXd& mass_per_input, double tail_tol, double amp) {
  const Eigen::RowVectorXd col_mass = channel.colwise().sum();
  double leak = 0.0;
  for (Eigen::Index k = 0; k < mass_per_input.size(); ++k) leak += mass_per_input[k] * std::max(0.0, 1.0 - col_mass[k]);
  if (leak >= 10.0 * tail_tol) {
    throw TruncationError("displacement by |alpha|=" + std::to_string(amp) + " pushes mass " + std::to_string(leak) +
                          " past the end of the ladder");
  }
  return leak;
}

}  // namespace

PhotonDist JointDist::signal_marginal() const { return PhotonDist(to_dist(probs.rowwise().sum()).probs, discarded); }

PhotonDist JointDist::idler_marginal() const {
  return PhotonDist(to_dist(probs.colwise().sum().transpose()).probs, discarded);
}

JointDist JointDist::vacuum(int n_max) {
  if (n_max < 0) throw ConfigError("n_max must be >= 0");
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
  p(0, 0) = 1.0;
  return JointDist(std::move(p));
}

JointDist JointDist::product(const PhotonDist& signal, const PhotonDist& idler) {
  const Eigen::Map<const Eigen::VectorXd> s(signal.probs.data(), signal.probs.size());
  const Eigen::Map<const Eigen::VectorXd> i(idler.probs.data(), idler.probs.size());
  return JointDist(s * i.transpose(), signal.discarded + idler.discarded);
}

void validate(const JointDist& p, double tail_tol) {
  if (p.probs.size() == 0) throw ConfigError("joint distribution is empty");
  if (!(p.probs.array() >= 0.0).all()) throw ConfigError("joint distribution has a negative or NaN entry");
  const double t = p.total();
  if (t < 1.0 - tail_tol || t > 1.0 + 1e-12) {
    throw ConfigError("joint distribution has total mass " + std::to_string(t) + " outside [1 - tail_tol, 1]");
  }
}

double joint_parity(const JointDist& p) {
  double s = 0.0;
  for (Eigen::Index m = 0; m < p.probs.rows(); ++m) {
    for (Eigen::Index n = 0; n < p.probs.cols(); ++n) s += ((m + n) % 2 == 0 ? 1.0 : -1.0) * p.probs(m, n);
  }
  return s;
}

double total_variation(const JointDist& p, const JointDist& q) {
  const Eigen::Index rows = std::max(p.probs.rows(), q.probs.rows());
  const Eigen::Index cols = std::max(p.probs.cols(), q.probs.cols());
  auto at = [](const Eigen::MatrixXd& a, Eigen::Index m, Eigen::Index n) {
    return m < a.rows() && n < a.cols() ? a(m, n) : 0.0;
  };
  double s = 0.0;
  for (Eigen::Index m = 0; m < rows; ++m) {
    for (Eigen::Index n = 0; n < cols; ++n) s += std::abs(at(p.probs, m, n) - at(q.probs, m, n));
  }
  return 0.5 * s;
}

double SourceParams::lambda() const { return std::tanh(r); }

void SourceParams::validate() const {
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("source.r must be finite and >= 0");
  require_fraction(eta_s, "source.eta_s");
  require_fraction(eta_i, "source.eta_i");
  require_fraction(overlap, "source.overlap");
  require_fraction(splitter_t, "source.splitter_t");
}

JointDist tmsv_joint(double r, int n_max, double tail_tol) {
  if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("squeezing parameter r must be finite and >= 0");
  if (n_max < 0) throw ConfigError("n_max must be >= 0");
  const double lam2 = std::pow(std::tanh(r), 2);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
  double w = 1.0 - lam2;
  for (int n = 0; n <= n_max; ++n) {
    p(n, n) = w;
    w *= lam2;
  }
  // Geometric tail beyond n_max is lam2^(n_max+1).
  const double tail = std::pow(lam2, n_max + 1);
  if (tail >= tail_tol) {
    throw TruncationError("squeezed vacuum with r=" + std::to_string(r) + " leaves tail mass " + std::to_string(tail) +
                          " above n_max=" + std::to_string(n_max));
  }
  return JointDist(std::move(p), tail);
}

JointDist apply_joint_loss(const JointDist& p, double eta_s, double eta_i) {
  require_fraction(eta_s, "eta_s");
  require_fraction(eta_i, "eta_i");
  const Eigen::MatrixXd ls = loss_matrix(eta_s, p.n_max_s());
  const Eigen::MatrixXd li = loss_matrix(eta_i, p.n_max_i());
  return JointDist(ls * p.probs * li.transpose(), p.discarded);
}

Eigen::MatrixXd displacement_channel(double amp, double overlap, double splitter_t, int n_max, double tail_tol) {
  require_fraction(overlap, "overlap");
  require_fraction(splitter_t, "splitter_t");
  if (!(amp >= 0.0)) throw ConfigError("displacement amplitude must be >= 0");

  Eigen::MatrixXd channel = loss_matrix(splitter_t, n_max);
  if (amp == 0.0) return channel;

  const double coherent_amp = std::sqrt(overlap) * amp;
  if (coherent_amp > 0.0) channel = displacement_kernel(coherent_amp, n_max, tail_tol).k * channel;

  const double background = (1.0 - overlap) * amp * amp;
  if (background > 0.0) {
    const PhotonDist bg = poisson_dist(background, n_max, tail_tol);
    Eigen::MatrixXd conv = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
    for (int k = 0; k <= n_max; ++k) {
      for (int n = k; n <= n_max; ++n) conv(n, k) = bg.probs[n - k];
    }
    channel = conv * channel;
  }
  return channel;
}

JointDist displace_signal(const JointDist& p, double amp, double overlap, double splitter_t, double tail_tol) {
  const Eigen::MatrixXd g = displacement_channel(amp, overlap, splitter_t, p.n_max_s(), tail_tol);
  const double leak = apply_leak(g, p.probs.rowwise().sum(), tail_tol, amp);
  return JointDist(g * p.probs, p.discarded + leak);
}

JointDist displace_idler(const JointDist& p, double amp, double overlap, double splitter_t, double tail_tol) {
  const Eigen::MatrixXd g = displacement_channel(amp, overlap, splitter_t, p.n_max_i(), tail_tol);
  const double leak = apply_leak(g, p.probs.colwise().sum().transpose(), tail_tol, amp);
  return JointDist(p.probs * g.transpose(), p.discarded + leak);
}

JointDist prepare_state(const SourceParams& src, double amp_s, double amp_i, int n_max, double tail_tol) {
  src.validate();
  JointDist p = apply_joint_loss(tmsv_joint(src.r, n_max, tail_tol), src.eta_s, src.eta_i);
  if (amp_s > 0.0 || src.splitter_t < 1.0) p = displace_signal(p, amp_s, src.overlap, src.splitter_t, tail_tol);
  if (amp_i > 0.0) p = displace_idler(p, amp_i, src.overlap, 1.0, tail_tol);
  return p;
}

double wigner_tmsv_analytic(std::complex<double> alpha, std::complex<double> beta, double r, double phi) {
  const std::complex<double> rotated = std::conj(beta) * std::polar(1.0, -phi);
  const double plus = std::norm(alpha + rotated);
  const double minus = std::norm(alpha - rotated);
  return 4.0 / (std::numbers::pi * std::numbers::pi) * std::exp(-std::exp(2.0 * r) * plus - std::exp(-2.0 * r) * minus);
}

double bessel_i0_scaled(double x) {
  x = std::abs(x);
  if (x <= 20.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 500; ++k) {
      term *= q / (static_cast<double>(k) * k);
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return sum * std::exp(-x);
  }
  // Asymptotic series; terms shrink until k ~ 2x, far beyond what x > 20 needs.
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    term *= (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
    sum += term;
    if (term < 1e-17 * sum) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

double bessel_i0(double x) { return bessel_i0_scaled(x) * std::exp(std::abs(x)); }

double wigner_avg_analytic(double abs_alpha, double abs_beta, double r) {
  // I0 is even, so the sign of its argument is irrelevant.
  const double arg = 4.0 * std::sinh(2.0 * r) * abs_alpha * abs_beta;
  const double gauss = -2.0 * std::cosh(2.0 * r) * (abs_alpha * abs_alpha + abs_beta * abs_beta);
  return 4.0 / (std::numbers::pi * std::numbers::pi) * std::exp(gauss + arg) * bessel_i0_scaled(arg);
}

}  // namespace wigprobe
