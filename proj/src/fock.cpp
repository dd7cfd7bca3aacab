#include "wigprobe/fock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace wigprobe {

namespace {

void require_ladder(int n_max) {
  if (n_max < 0) throw ConfigError("Fock ladder truncation n_max must be >= 0, got " + std::to_string(n_max));
}

void require_probability(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
}

}  // namespace

double PhotonDist::total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

double PhotonDist::mean() const {
  double m = 0.0;
  for (int n = 0; n <= n_max(); ++n) m += n * probs[n];
  return m;
}

PhotonDist PhotonDist::vacuum(int n_max) { return fock(0, n_max); }

PhotonDist PhotonDist::fock(int n, int n_max) {
  require_ladder(n_max);
  if (n < 0 || n > n_max) throw ConfigError("Fock state |" + std::to_string(n) + "> is outside the ladder 0.." + std::to_string(n_max));
  std::vector<double> p(n_max + 1, 0.0);
  p[n] = 1.0;
  return PhotonDist(std::move(p));
}

void validate(const PhotonDist& p, double tail_tol) {
  if (p.probs.empty()) throw ConfigError("photon-number distribution is empty");
  for (int n = 0; n <= p.n_max(); ++n) {
    if (!(p.probs[n] >= 0.0)) throw ConfigError("photon-number distribution has a negative or NaN entry at n=" + std::to_string(n));
  }
  const double t = p.total();
  if (t < 1.0 - tail_tol || t > 1.0 + 1e-12) {
    throw ConfigError("photon-number distribution has total mass " + std::to_string(t) + " outside [1 - tail_tol, 1]");
  }
}

PhotonDist poisson_dist(double mean, int n_max, double tail_tol) {
  require_ladder(n_max);
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw ConfigError("Poisson mean must be finite and >= 0");
  if (mean == 0.0) return PhotonDist::vacuum(n_max);

  const double log_mean = std::log(mean);
  auto term = [&](int n) { return std::exp(n * log_mean - mean - std::lgamma(n + 1.0)); };

  std::vector<double> p(n_max + 1);
  for (int n = 0; n <= n_max; ++n) p[n] = term(n);

  // Sum the tail directly instead of 1 - sum(p) so tiny tails stay accurate.
  double tail = 0.0;
  double t = term(n_max + 1);
  for (int n = n_max + 1;; ++n) {
    tail += t;
    if (n > mean && t <= 1e-18 * tail) break;
    if (n > n_max + 100000) break;
    t *= mean / (n + 1);
  }
  if (tail >= tail_tol) {
    throw TruncationError("Poisson(" + std::to_string(mean) + ") leaves tail mass " + std::to_string(tail) +
                          " above n_max=" + std::to_string(n_max));
  }
  return PhotonDist(std::move(p), tail);
}

Eigen::MatrixXd loss_matrix(double eta, int n_max) {
  require_ladder(n_max);
  require_probability(eta, "transmission eta");
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
  if (eta == 1.0) return Eigen::MatrixXd::Identity(n_max + 1, n_max + 1);
  if (eta == 0.0) {
    l.row(0).setOnes();
    return l;
  }
  const double log_eta = std::log(eta);
  const double log_loss = std::log1p(-eta);
  for (int n = 0; n <= n_max; ++n) {
    for (int m = 0; m <= n; ++m) {
      const double log_c = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0);
      l(m, n) = std::exp(log_c + m * log_eta + (n - m) * log_loss);
    }
  }
  return l;
}

PhotonDist loss_channel(const PhotonDist& p, double eta) {
  require_probability(eta, "transmission eta");
  if (eta == 1.0) return p;
  const Eigen::MatrixXd l = loss_matrix(eta, p.n_max());
  const Eigen::Map<const Eigen::VectorXd> in(p.probs.data(), p.probs.size());
  const Eigen::VectorXd out = l * in;
  return PhotonDist(std::vector<double>(out.data(), out.data() + out.size()), p.discarded);
}

DisplacementKernel displacement_kernel(double amp, int n_max, double tail_tol) {
  require_ladder(n_max);
  if (!(amp >= 0.0) || !std::isfinite(amp)) throw ConfigError("displacement amplitude must be finite and >= 0");

  DisplacementKernel kern;
  kern.amp = amp;
  kern.k = Eigen::MatrixXd::Zero(n_max + 1, n_max + 1);
  if (amp == 0.0) {
    kern.k.setIdentity();
    kern.column_mass.assign(n_max + 1, 1.0);
    kern.audited_columns = n_max + 1;
    return kern;
  }

  const double x = amp * amp;
  const double log_x = std::log(x);
  const bool rescale = x > 8.0;
  constexpr double kBig = 1e150;
  const double log_big = std::log(kBig);

  for (int d = 0; d <= n_max; ++d) {
    // L_j^{(d)}(x) for j = 0..n_max-d, value = cur * exp(log_scale).
    double prev = 0.0;
    double cur = 1.0;
    double log_scale = 0.0;
    for (int j = 0; j + d <= n_max; ++j) {
      if (j == 1) {
        prev = cur;
        cur = 1.0 + d - x;
      } else if (j > 1) {
        const double next = ((2.0 * (j - 1) + 1.0 + d - x) * cur - (j - 1.0 + d) * prev) / j;
        prev = cur;
        cur = next;
      }
      if (rescale && std::abs(cur) > kBig) {
        cur /= kBig;
        prev /= kBig;
        log_scale += log_big;
      }
      double value = 0.0;
      if (cur != 0.0) {
        const double log_pref = -x + d * log_x + std::lgamma(j + 1.0) - std::lgamma(j + d + 1.0);
        value = std::exp(log_pref + 2.0 * (std::log(std::abs(cur)) + log_scale));
      }
      kern.k(j + d, j) = value;
      kern.k(j, j + d) = value;
    }
  }

  kern.column_mass.resize(n_max + 1);
  kern.audited_columns = 0;
  bool intact = true;
  for (int c = 0; c <= n_max; ++c) {
    kern.column_mass[c] = kern.k.col(c).sum();
    if (intact && kern.column_mass[c] >= 1.0 - tail_tol) {
      ++kern.audited_columns;
    } else {
      intact = false;
    }
  }
  if (kern.audited_columns == 0) {
    throw TruncationError("displacement by |alpha|=" + std::to_string(amp) + " leaks vacuum mass " +
                          std::to_string(1.0 - kern.column_mass[0]) + " past n_max=" + std::to_string(n_max));
  }
  return kern;
}

PhotonDist apply_displacement(const PhotonDist& p, const DisplacementKernel& kern, double tail_tol) {
  if (p.n_max() > kern.n_max()) {
    throw ConfigError("displacement kernel ladder (" + std::to_string(kern.n_max()) +
                      ") is shorter than the distribution ladder (" + std::to_string(p.n_max()) + ")");
  }
  const int cols = p.n_max() + 1;
  const Eigen::Map<const Eigen::VectorXd> in(p.probs.data(), cols);
  const Eigen::VectorXd out = kern.k.leftCols(cols) * in;

  double leak = 0.0;
  for (int c = 0; c < cols; ++c) leak += p.probs[c] * std::max(0.0, 1.0 - kern.column_mass[c]);
  if (leak >= 10.0 * tail_tol) {
    throw TruncationError("displacement by |alpha|=" + std::to_string(kern.amp) + " pushes mass " + std::to_string(leak) +
                          " past n_max=" + std::to_string(kern.n_max()));
  }
  return PhotonDist(std::vector<double>(out.data(), out.data() + out.size()), p.discarded + leak);
}

PhotonDist convolve(const PhotonDist& p, const PhotonDist& q, int n_max, double tail_tol) {
  if (n_max < 0) n_max = std::max(p.n_max(), q.n_max());
  std::vector<double> out(n_max + 1, 0.0);
  for (int k = 0; k <= std::min(p.n_max(), n_max); ++k) {
    if (p.probs[k] == 0.0) continue;
    for (int j = 0; j <= q.n_max() && k + j <= n_max; ++j) out[k + j] += p.probs[k] * q.probs[j];
  }

  // suffix[j] = sum of q[j..]
  std::vector<double> suffix(q.n_max() + 2, 0.0);
  for (int j = q.n_max(); j >= 0; --j) suffix[j] = suffix[j + 1] + q.probs[j];
  double dropped = 0.0;
  for (int k = 0; k <= p.n_max(); ++k) {
    const int first_lost = n_max - k + 1;
    if (first_lost <= 0) {
      dropped += p.probs[k] * suffix[0];
    } else if (first_lost <= q.n_max()) {
      dropped += p.probs[k] * suffix[first_lost];
    }
  }
  if (dropped >= tail_tol) {
    throw TruncationError("convolution pushes mass " + std::to_string(dropped) + " past n_max=" + std::to_string(n_max));
  }
  return PhotonDist(std::move(out), p.discarded + q.discarded + dropped);
}

double parity(const PhotonDist& p) {
  double even = 0.0;
  double odd = 0.0;
  for (int n = 0; n <= p.n_max(); ++n) (n % 2 == 0 ? even : odd) += p.probs[n];
  return even - odd;
}

double total_variation(const PhotonDist& p, const PhotonDist& q) {
  const int n = std::max(p.n_max(), q.n_max());
  double s = 0.0;
  for (int i = 0; i <= n; ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

PhotonDist truncate(const PhotonDist& p, int n_max, double tail_tol) {
  require_ladder(n_max);
  std::vector<double> out(n_max + 1, 0.0);
  double dropped = 0.0;
  for (int n = 0; n <= p.n_max(); ++n) {
    if (n <= n_max) {
      out[n] = p.probs[n];
    } else {
      dropped += p.probs[n];
    }
  }
  if (dropped >= tail_tol) {
    throw TruncationError("truncating to n_max=" + std::to_string(n_max) + " drops mass " + std::to_string(dropped));
  }
  return PhotonDist(std::move(out), p.discarded + dropped);
}

}  // namespace wigprobe
