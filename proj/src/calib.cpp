#include "wigprobe/calib.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>

#include "wigprobe/errors.hpp"

namespace wigprobe {

namespace {

Pattern mode_bits(Pattern p, const Tmd& tmd, int mode) {
  const int bs = tmd.signal.bins_per_mode;
  return mode == 0 ? (p & ((Pattern{1} << bs) - 1)) : (p >> bs);
}

struct Line {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
};

Line least_squares_line(const std::vector<double>& x, const std::vector<double>& y, std::vector<double> w = {}) {
  if (w.empty()) w.assign(x.size(), 1.0);
  double n = 0.0;
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    n += w[k];
    mx += w[k] * x[k];
    my += w[k] * y[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += w[k] * (x[k] - mx) * (x[k] - mx);
    sxy += w[k] * (x[k] - mx) * (y[k] - my);
    syy += w[k] * (y[k] - my) * (y[k] - my);
  }
  Line l;
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double e = y[k] - l.intercept - l.slope * x[k];
    ss_res += e * e;
  }
  l.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return l;
}

}  // namespace

double estimate_displacement(double zero_click_prob, const ProbeSet& probes, int mode) {
  if (!(zero_click_prob > 0.0 && zero_click_prob <= 1.0)) {
    throw ConfigError("zero-click probability must lie in (0, 1]");
  }
  if (mode != 0 && mode != 1) throw ConfigError("mode must be 0 (signal) or 1 (idler)");
  bool any_clean = false;
  for (const auto& pr : probes.probes) {
    if ((mode == 0 ? pr.amp_i : pr.amp_s) == 0.0) any_clean = true;
  }
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> w;
  double lo = 1.0;
  double hi = 0.0;
  for (const auto& pr : probes.probes) {
    if (any_clean && (mode == 0 ? pr.amp_i : pr.amp_s) != 0.0) continue;
    const double amp = mode == 0 ? pr.amp_s : pr.amp_i;
    const double p0 = (mode == 0 ? pr.freq_s : pr.freq_i).at(0);
    lo = std::min(lo, p0);
    hi = std::max(hi, p0);
    if (p0 <= 0.0) continue;
    x.push_back(amp * amp);
    y.push_back(std::log(p0));
    // Inverse binomial variance of log p0; the floor keeps p0 = 1 finite.
    const double shots = static_cast<double>(pr.shots);
    w.push_back(pr.shots == 0 ? 1.0 : shots * p0 / (1.0 - p0 + 1.0 / shots));
  }
  if (x.size() < 2) throw DataError("need at least two probes with a nonzero zero-click probability");
  if (zero_click_prob < lo || zero_click_prob > hi) {
    throw DataError("zero-click probability " + std::to_string(zero_click_prob) + " lies outside the probe range [" +
                    std::to_string(lo) + ", " + std::to_string(hi) + "]; refusing to extrapolate");
  }
  const Line l = least_squares_line(x, y, w);
  if (!(l.slope < 0.0)) throw NumericalError("probe zero-click probability does not fall with amplitude");
  const double amp2 = (std::log(zero_click_prob) - l.intercept) / l.slope;
  return amp2 > 0.0 ? std::sqrt(amp2) : 0.0;
}

double zero_click_fraction(const ClickRecord& rec, const Tmd& tmd, int mode) {
  if (rec.shots == 0) throw DataError("empty click record");
  std::uint64_t zero = 0;
  for (const auto& [p, n] : rec.counts) {
    if (mode_bits(p, tmd, mode) == 0) zero += n;
  }
  return static_cast<double>(zero) / static_cast<double>(rec.shots);
}

double pattern_deviance(const ClickRecord& rec, const PatternDist& model) {
  if (rec.shots == 0) throw DataError("empty click record");
  const double shots = static_cast<double>(rec.shots);
  double g2 = 0.0;
  for (const auto& [p, n] : rec.counts) {
    if (p >= model.size()) throw DataError("record pattern outside the model's pattern space");
    if (n == 0) continue;
    const double k = static_cast<double>(n);
    g2 += k * std::log(k / (shots * std::max(model.probs[p], 1e-300)));
  }
  return 2.0 * g2;
}

PatternDist source_patterns(double r, double eta_s, double eta_i, const Tmd& tmd) {
  const int n_max = std::min(tmd.signal.photon_cap, tmd.idler.photon_cap);
  return joint_response(apply_joint_loss(tmsv_joint(r, n_max), eta_s, eta_i), tmd);
}

SourceFit fit_source(const ClickRecord& rec, const Tmd& tmd, const SourceFitOptions& opt) {
  if (!(opt.r_min >= 0.0 && opt.r_max > opt.r_min && opt.eta_min >= 0.0 && opt.eta_max <= 1.0 &&
        opt.eta_max > opt.eta_min)) {
    throw ConfigError("fit_source: invalid search box");
  }
  if (opt.coarse_r < 2 || opt.coarse_eta < 2 || opt.refine_points < 3 || opt.refinements < 0) {
    throw ConfigError("fit_source: grid needs at least 2 coarse and 3 refinement points per axis");
  }
  SourceFit fit;
  auto deviance = [&](double r, double es, double ei) {
    ++fit.evaluations;
    return pattern_deviance(rec, source_patterns(r, es, ei, tmd));
  };
  auto axis = [](double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) v[k] = lo + (hi - lo) * k / (n - 1);
    return v;
  };

  double best = std::numeric_limits<double>::infinity();
  double br = opt.r_min;
  double be = opt.eta_min;
  auto scan = [&](const std::vector<double>& rs, const std::vector<double>& es) {
    for (double r : rs) {
      for (double e : es) {
        const double c = deviance(r, e, e);
        if (c < best) {
          best = c;
          br = r;
          be = e;
        }
      }
    }
  };

  const auto eta_coarse = axis(opt.eta_min, opt.eta_max, opt.coarse_eta);
  scan(axis(opt.r_min, opt.r_max, opt.coarse_r), eta_coarse);
  double step_r = (opt.r_max - opt.r_min) / (opt.coarse_r - 1);
  double step_e = (opt.eta_max - opt.eta_min) / (opt.coarse_eta - 1);
  for (int pass = 0; pass < opt.refinements; ++pass) {
    const double r_lo = std::max(opt.r_min, br - step_r);
    const double r_hi = std::min(opt.r_max, br + step_r);
    const double e_lo = std::max(opt.eta_min, be - step_e);
    const double e_hi = std::min(opt.eta_max, be + step_e);
    scan(axis(r_lo, r_hi, opt.refine_points), axis(e_lo, e_hi, opt.refine_points));
    step_r = (r_hi - r_lo) / (opt.refine_points - 1);
    step_e = (e_hi - e_lo) / (opt.refine_points - 1);
  }
  fit.r_hat = br;
  fit.eta_hat = be;
  fit.eta_i_hat = be;
  fit.fit_residual = best;

  if (opt.asymmetric_eta) {
    // Alternating one-dimensional passes over eta_i and eta_s at fixed r_hat.
    double es = be;
    double ei = be;
    double step = (opt.eta_max - opt.eta_min) / (opt.coarse_eta - 1);
    for (int pass = 0; pass <= opt.refinements; ++pass) {
      for (int which = 0; which < 2; ++which) {
        double& target = which == 0 ? ei : es;
        const double lo = std::max(opt.eta_min, target - step);
        const double hi = std::min(opt.eta_max, target + step);
        for (double e : axis(lo, hi, opt.refine_points)) {
          const double c = which == 0 ? deviance(br, es, e) : deviance(br, e, ei);
          if (c < best) {
            best = c;
            target = e;
          }
        }
      }
      step = 2.0 * step / (opt.refine_points - 1);
    }
    fit.eta_hat = es;
    fit.eta_i_hat = ei;
    fit.fit_residual = best;
  }

  const double eps = 1e-12;
  fit.on_boundary = fit.r_hat <= opt.r_min + eps || fit.r_hat >= opt.r_max - eps ||
                    fit.eta_hat <= opt.eta_min + eps || fit.eta_hat >= opt.eta_max - eps ||
                    fit.eta_i_hat <= opt.eta_min + eps || fit.eta_i_hat >= opt.eta_max - eps;

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double e : eta_coarse) {
    const double c = deviance(fit.r_hat, e, e);
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  fit.eta_unidentified = hi - lo < 1.0;
  return fit;
}

double AfterpulseFit::x(double amp) const {
  const double ap = s * amp * amp;
  const double total = c + ap;
  if (!(ap > 0.0) || !(total > 0.0)) return 0.0;
  return std::min(ap / total, 1.0 - std::numeric_limits<double>::epsilon());
}

AfterpulseFit fit_afterpulse(const std::vector<std::pair<double, double>>& singles) {
  if (singles.size() < 3) throw DataError("afterpulse fit needs at least 3 displacement settings");
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& [a2, rate] : singles) {
    if (!(a2 >= 0.0) || !(rate >= 0.0)) throw DataError("afterpulse fit: amp^2 and rates must be nonnegative");
    x.push_back(a2);
    y.push_back(rate);
  }
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (*mx == *mn) throw DataError("afterpulse fit: all settings have the same amp^2");
  const Line l = least_squares_line(x, y);
  AfterpulseFit fit;
  fit.c = l.intercept;
  fit.s = l.slope;
  fit.r_squared = l.r_squared;
  if (fit.s < 0.0) fit.warning = "negative idler-rate slope: afterpulsing not detected";
  return fit;
}

double idler_singles_rate(const ClickRecord& rec, const Tmd& tmd) {
  if (rec.shots == 0) throw DataError("empty click record");
  std::uint64_t singles = 0;
  for (const auto& [p, n] : rec.counts) {
    if (std::popcount(mode_bits(p, tmd, 1)) == 1) singles += n;
  }
  return static_cast<double>(singles) / static_cast<double>(rec.shots);
}

PhotonDist herald_signal(const JointDist& p, double x) {
  if (!(x >= 0.0 && x < 1.0)) throw ConfigError("afterpulse share x must lie in [0, 1)");
  const int ns = p.n_max_s();
  if (p.n_max_i() < 1) throw ConfigError("heralding needs the idler ladder to reach one photon");
  std::vector<double> h(ns + 1, 0.0);
  for (int m = 0; m <= ns; ++m) h[m] = (1.0 - x) * p.probs(m, 1);
  if (ns >= 1 && x > 0.0) h[1] += x * p.probs.row(1).sum();
  double w = 0.0;
  for (double v : h) w += v;
  if (!(w > 0.0)) throw NumericalError("heralding weight is zero: no single-detection events");
  for (double& v : h) v /= w;
  return PhotonDist(std::move(h));
}

PhotonDist herald_from_record(const ClickRecord& rec, const Tmd& tmd) {
  std::vector<double> h(tmd.signal.bins_per_mode + 1, 0.0);
  std::uint64_t heralds = 0;
  for (const auto& [p, n] : rec.counts) {
    if (std::popcount(mode_bits(p, tmd, 1)) != 1) continue;
    h[std::popcount(mode_bits(p, tmd, 0))] += static_cast<double>(n);
    heralds += n;
  }
  if (heralds == 0) throw DataError("no shot has exactly one clicked idler bin");
  for (double& v : h) v /= static_cast<double>(heralds);
  return PhotonDist(std::move(h));
}

double wigner_point(double parity_value, WignerConvention convention) {
  if (convention == WignerConvention::single_mode) return 2.0 * parity_value / std::numbers::pi;
  return 4.0 * parity_value / (std::numbers::pi * std::numbers::pi);
}

GaussianFit fit_gaussian(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("fit_gaussian: x and y differ in length");
  std::vector<double> u;
  std::vector<double> v;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (y[k] <= 0.0) continue;
    u.push_back(x[k] * x[k]);
    v.push_back(std::log(y[k]));
  }
  if (u.size() < 2) throw NumericalError("fit_gaussian needs at least two positive points");
  if (*std::max_element(u.begin(), u.end()) == *std::min_element(u.begin(), u.end())) {
    throw NumericalError("fit_gaussian needs points at two or more distinct |x|");
  }
  const Line l = least_squares_line(u, v);
  if (!(l.slope < 0.0)) throw NumericalError("fit_gaussian: data do not decay");
  return {std::exp(l.intercept), -0.5 / l.slope};
}

}  // namespace wigprobe
