#include "wigprobe/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "wigprobe/nnls.hpp"
#include "wigprobe/rng.hpp"

namespace wigprobe {

namespace {

struct Rows {
  std::vector<double> amps;
  std::vector<const std::vector<double>*> freqs;
};

Eigen::MatrixXd poisson_design(const std::vector<double>& amps, int n_max) {
  Eigen::MatrixXd c(static_cast<Eigen::Index>(amps.size()), n_max + 1);
  for (std::size_t r = 0; r < amps.size(); ++r) {
    // The tail past n_max is part of the model error, not a truncation failure.
    const auto p = poisson_dist(amps[r] * amps[r], n_max, 1.0);
    for (int n = 0; n <= n_max; ++n) c(static_cast<Eigen::Index>(r), n) = p.probs[n];
  }
  return c;
}

Eigen::MatrixXd difference_operator(int order, int size) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(size, size);
  for (int k = 0; k < order && d.rows() > 1; ++k) {
    const Eigen::MatrixXd next = d.bottomRows(d.rows() - 1) - d.topRows(d.rows() - 1);
    d = next;
  }
  return d;
}

double menger_curvature(double x1, double y1, double x2, double y2, double x3, double y3) {
  const double area2 = (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1);
  const double a = std::hypot(x2 - x1, y2 - y1);
  const double b = std::hypot(x3 - x2, y3 - y2);
  const double c = std::hypot(x3 - x1, y3 - y1);
  const double den = a * b * c;
  return den > 0.0 ? 2.0 * area2 / den : 0.0;
}

ResponseEstimate solve_response(const Rows& rows, int n_max, int bins, const ResponseOptions& opt) {
  if (n_max < 0) throw ConfigError("response ladder n_max must be >= 0");
  if (rows.amps.empty()) throw DataError("no probes available for the response estimate");
  const Eigen::MatrixXd c = poisson_design(rows.amps, n_max);
  const Eigen::Index n_pat = Eigen::Index{1} << bins;
  Eigen::MatrixXd f(c.rows(), n_pat);
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    const auto& v = *rows.freqs[r];
    if (static_cast<Eigen::Index>(v.size()) != n_pat) throw DataError("probe frequencies do not match the bin count");
    for (Eigen::Index k = 0; k < n_pat; ++k) f(r, k) = v[k];
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> plain(c);
  const auto& sv = plain.singularValues();
  const double smax = sv[0];
  ResponseEstimate est;
  est.bins = bins;
  est.smallest_sv = sv[sv.size() - 1] / smax;
  est.rank = static_cast<int>((sv.array() > opt.sv_cutoff * smax).count());

  std::set<long long> distinct;
  for (double a : rows.amps) distinct.insert(std::llround(a * 1e9));
  if (static_cast<int>(distinct.size()) < n_max + 1) {
    throw NumericalError("response estimate is not identifiable: " + std::to_string(distinct.size()) +
                         " distinct probe amplitudes for " + std::to_string(n_max + 1) +
                         " photon numbers (smallest relative singular value " + std::to_string(est.smallest_sv) + ")");
  }

  std::vector<double> grid = opt.ridge_grid;
  if (grid.empty()) {
    for (int e = -16; e <= -2; ++e) grid.push_back(std::pow(10.0, e));
  }
  const Eigen::MatrixXd pen = difference_operator(opt.penalty_order, n_max + 1);

  struct Point {
    double lambda, log_res, log_semi;
    Eigen::MatrixXd x;
  };
  std::vector<Point> pts;
  for (double lam : grid) {
    const double w = std::sqrt(lam) * smax;
    Eigen::MatrixXd a(c.rows() + pen.rows(), c.cols());
    a.topRows(c.rows()) = c;
    a.bottomRows(pen.rows()) = w * pen;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(a.rows(), n_pat);
    rhs.topRows(c.rows()) = f;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) {
      if (s[k] > opt.sv_cutoff * s[0]) inv[k] = 1.0 / s[k];
    }
    Eigen::MatrixXd x = svd.matrixV() * inv.asDiagonal() * (svd.matrixU().transpose() * rhs);
    const double res = (c * x - f).norm();
    const double semi = (pen * x).norm();
    pts.push_back({lam, std::log(res + 1e-300), std::log(semi + 1e-300), std::move(x)});
  }

  std::size_t best = 0;
  if (pts.size() >= 3) {
    double kmax = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k + 1 < pts.size(); ++k) {
      const double kappa = menger_curvature(pts[k - 1].log_res, pts[k - 1].log_semi, pts[k].log_res, pts[k].log_semi,
                                            pts[k + 1].log_res, pts[k + 1].log_semi);
      if (kappa > kmax) {
        kmax = kappa;
        best = k;
      }
    }
  }
  est.ridge = pts[best].lambda;
  const Eigen::MatrixXd& x = pts[best].x;  // (n_max + 1) x patterns
  est.t.resize(n_pat, n_max + 1);
  for (int n = 0; n <= n_max; ++n) est.t.col(n) = project_to_simplex(x.row(n).transpose());
  return est;
}

// Multinomial redraw of the observed counts.
std::vector<std::uint64_t> redraw(const std::vector<std::uint64_t>& counts, std::uint64_t shots, std::mt19937_64& rng) {
  std::vector<std::uint64_t> out(counts.size(), 0);
  std::uint64_t remaining = shots;
  std::uint64_t rest = shots;
  for (std::size_t k = 0; k < counts.size() && remaining > 0; ++k) {
    if (k + 1 == counts.size()) {
      out[k] = remaining;
      break;
    }
    const double frac = static_cast<double>(counts[k]) / static_cast<double>(rest);
    std::binomial_distribution<unsigned long long> draw(remaining, std::clamp(frac, 0.0, 1.0));
    out[k] = draw(rng);
    remaining -= out[k];
    rest -= counts[k];
  }
  return out;
}

std::vector<std::size_t> select_patterns(const std::vector<std::uint64_t>& counts, int k, PatternSelection how,
                                         std::mt19937_64& rng) {
  std::vector<std::size_t> seen;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (counts[j] > 0) seen.push_back(j);
  }
  if (static_cast<int>(seen.size()) <= k) return seen;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (how == PatternSelection::uniform) {
    std::shuffle(seen.begin(), seen.end(), rng);
    seen.resize(k);
  } else {
    // Weighted sampling without replacement: keep the k largest log(u) / w.
    std::vector<std::pair<double, std::size_t>> keys;
    keys.reserve(seen.size());
    for (std::size_t j : seen) keys.emplace_back(std::log(u(rng)) / static_cast<double>(counts[j]), j);
    std::partial_sort(keys.begin(), keys.begin() + k, keys.end(), std::greater<>());
    seen.clear();
    for (int j = 0; j < k; ++j) seen.push_back(keys[j].second);
  }
  std::sort(seen.begin(), seen.end());
  return seen;
}

struct Observed {
  std::vector<Pattern> patterns;
  std::vector<std::uint64_t> counts;
  std::uint64_t shots = 0;
};

Observed observed(const ClickRecord& rec) {
  if (rec.shots == 0 || rec.counts.empty()) throw DataError("click record is empty");
  Observed o;
  o.shots = rec.shots;
  for (const auto& [p, n] : rec.counts) {
    if (n == 0) continue;
    o.patterns.push_back(p);
    o.counts.push_back(n);
  }
  return o;
}

using RowFn = std::function<Eigen::RowVectorXd(Pattern)>;
using MapFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

Reconstruction bootstrap_fit(const ClickRecord& record, const RowFn& row, int unknowns, const MapFn& to_joint,
                             const FitOptions& opt, std::uint64_t seed) {
  if (opt.n_patterns < 1) throw ConfigError("n_patterns must be >= 1");
  if (opt.n_boot < 1) throw ConfigError("n_boot must be >= 1");
  const Observed obs = observed(record);

  std::vector<Eigen::RowVectorXd> rows(obs.patterns.size());
  for (std::size_t k = 0; k < obs.patterns.size(); ++k) rows[k] = row(obs.patterns[k]);

  Reconstruction rec;
  std::vector<Eigen::MatrixXd> raw;
  Eigen::VectorXd mean_x = Eigen::VectorXd::Zero(unknowns);
  for (int b = 0; b < opt.n_boot; ++b) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(b));
    bool done = false;
    for (int attempt = 0; attempt <= opt.max_retries && !done; ++attempt) {
      const auto counts = opt.resample_shots ? redraw(obs.counts, obs.shots, rng) : obs.counts;
      const auto pick = select_patterns(counts, opt.n_patterns, opt.selection, rng);
      if (pick.empty()) continue;
      Eigen::MatrixXd a(static_cast<Eigen::Index>(pick.size()), unknowns);
      Eigen::VectorXd f(a.rows());
      for (std::size_t k = 0; k < pick.size(); ++k) {
        a.row(static_cast<Eigen::Index>(k)) = rows[pick[k]];
        f[static_cast<Eigen::Index>(k)] = static_cast<double>(counts[pick[k]]) / static_cast<double>(obs.shots);
      }
      try {
        NnlsResult sol;
        if (opt.weighting == PatternWeighting::none) {
          sol = nnls_capped(a, f);
        } else {
          // Shot-noise weights, first from the observed frequencies, then from the fitted ones.
          const double floor = 1.0 / static_cast<double>(obs.shots);
          Eigen::VectorXd q = f;
          for (int pass = 0; pass <= opt.reweight_passes; ++pass) {
            const Eigen::VectorXd w = q.cwiseMax(floor).cwiseSqrt().cwiseInverse();
            sol = nnls_capped(w.asDiagonal() * a, w.cwiseProduct(f));
            q = a * sol.x;
          }
        }
        raw.push_back(to_joint(sol.x));
        mean_x += sol.x;
        rec.n_patterns_used = static_cast<int>(pick.size());
        done = true;
      } catch (const NumericalError&) {
      }
    }
    if (!done) throw NumericalError("pattern fit failed for every subset drawn in replica " + std::to_string(b));
  }

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(raw[0].rows(), raw[0].cols());
  for (const auto& m : raw) mean += m;
  mean /= static_cast<double>(raw.size());
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(mean.rows(), mean.cols());
  for (const auto& m : raw) var += (m - mean).cwiseAbs2();
  rec.bootstrap_std = raw.size() > 1 ? Eigen::MatrixXd((var / static_cast<double>(raw.size() - 1)).cwiseSqrt())
                                     : Eigen::MatrixXd::Zero(mean.rows(), mean.cols());

  rec.trace = mean.sum();
  if (rec.trace < opt.min_trace) {
    throw NumericalError("reconstructed trace " + std::to_string(rec.trace) + " is below " +
                         std::to_string(opt.min_trace) + "; the response model does not explain the data");
  }
  rec.p = JointDist(mean / rec.trace);
  for (auto& m : raw) {
    const double t = m.sum();
    rec.replicas.emplace_back(t > 0.0 ? Eigen::MatrixXd(m / t) : m);
  }

  mean_x /= static_cast<double>(raw.size()) * rec.trace;
  double ss = 0.0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double d = static_cast<double>(obs.counts[k]) / static_cast<double>(obs.shots) - rows[k].dot(mean_x);
    ss += d * d;
  }
  rec.residual = std::sqrt(ss / static_cast<double>(rows.size()));
  return rec;
}

}  // namespace

void ProbeSet::validate() const {
  tmd.validate();
  const std::size_t ns = tmd.signal.n_patterns();
  const std::size_t ni = tmd.idler.n_patterns();
  for (std::size_t k = 0; k < probes.size(); ++k) {
    const auto& p = probes[k];
    const std::string where = "probe " + std::to_string(k);
    if (!(p.amp_s >= 0.0) || !(p.amp_i >= 0.0)) throw DataError(where + ": amplitudes must be >= 0");
    if (p.freq_s.size() != ns || p.freq_i.size() != ni) throw DataError(where + ": pattern table has the wrong size");
    for (const auto* v : {&p.freq_s, &p.freq_i}) {
      double s = 0.0;
      for (double f : *v) {
        if (!(f >= 0.0)) throw DataError(where + ": negative frequency");
        s += f;
      }
      if (std::abs(s - 1.0) > 1e-9) throw DataError(where + ": frequencies do not sum to 1");
    }
  }
}

std::vector<std::pair<double, double>> probe_grid(int n_s, double max_s, int n_i, double max_i) {
  if (n_s < 1 || n_i < 1) throw ConfigError("probe grid needs at least one amplitude per mode");
  if (!(max_s >= 0.0) || !(max_i >= 0.0)) throw ConfigError("probe grid ranges must be >= 0");
  std::vector<std::pair<double, double>> out;
  for (int a = 0; a < n_s; ++a) {
    const double as = n_s == 1 ? 0.0 : max_s * a / (n_s - 1);
    for (int b = 0; b < n_i; ++b) out.emplace_back(as, n_i == 1 ? 0.0 : max_i * b / (n_i - 1));
  }
  return out;
}

ProbeSet build_probe_library(const std::vector<std::pair<double, double>>& amps, const Tmd& tmd,
                             std::uint64_t shots, std::uint64_t seed, int n_max) {
  tmd.validate();
  ProbeSet set;
  set.tmd = tmd;
  set.probes.reserve(amps.size());
  for (std::size_t k = 0; k < amps.size(); ++k) {
    const auto [as, ai] = amps[k];
    if (!(as >= 0.0) || !(ai >= 0.0)) throw ConfigError("probe amplitudes must be >= 0");
    auto [fs, fi] = product_response_marginals(poisson_dist(as * as, n_max), poisson_dist(ai * ai, n_max), tmd);
    Probe p{as, ai, shots, {}, {}};
    if (shots == 0) {
      p.freq_s = std::move(fs.probs);
      p.freq_i = std::move(fi.probs);
    } else {
      p.freq_s = sample_from(fs, shots, derive_seed(seed, 2 * k)).frequencies(fs.bins).probs;
      p.freq_i = sample_from(fi, shots, derive_seed(seed, 2 * k + 1)).frequencies(fi.bins).probs;
    }
    set.probes.push_back(std::move(p));
  }
  return set;
}

ResponseEstimate estimate_response(const ProbeSet& probes, int n_max, int mode, const ResponseOptions& opt) {
  if (mode != 0 && mode != 1) throw ConfigError("mode must be 0 (signal) or 1 (idler)");
  Rows rows;
  for (const auto& p : probes.probes) {
    rows.amps.push_back(mode == 0 ? p.amp_s : p.amp_i);
    rows.freqs.push_back(mode == 0 ? &p.freq_s : &p.freq_i);
  }
  const int bins = mode == 0 ? probes.tmd.signal.bins_per_mode : probes.tmd.idler.bins_per_mode;
  return solve_response(rows, n_max, bins, opt);
}

ResponseEstimate estimate_shared_response(const ProbeSet& probes, int n_max, const ResponseOptions& opt) {
  if (probes.tmd.signal.bins_per_mode != probes.tmd.idler.bins_per_mode) {
    throw ConfigError("a shared response needs the same bin count in both modes");
  }
  Rows rows;
  for (const auto& p : probes.probes) {
    rows.amps.push_back(p.amp_s);
    rows.freqs.push_back(&p.freq_s);
    if (p.amp_s == 0.0) {
      rows.amps.push_back(p.amp_i);
      rows.freqs.push_back(&p.freq_i);
    }
  }
  return solve_response(rows, n_max, probes.tmd.signal.bins_per_mode, opt);
}

int recommended_ladder(double amp) {
  return std::min(40, 6 + static_cast<int>(std::ceil(amp * amp + 4.0 * amp)));
}

Reconstruction fit_state(const ClickRecord& record, const ResponseEstimate& signal, const ResponseEstimate& idler,
                         const FitOptions& opt, std::uint64_t seed) {
  if (opt.n_s < 0 || opt.n_s > signal.n_max() || opt.n_i < 0 || opt.n_i > idler.n_max()) {
    throw ConfigError("reconstruction ladder exceeds the estimated response");
  }
  const int bs = signal.bins;
  const Pattern mask = static_cast<Pattern>((1u << bs) - 1);
  const int cols = opt.n_i + 1;
  const int unknowns = (opt.n_s + 1) * cols;
  for (const auto& [p, n] : record.counts) {
    if ((p >> bs) >= static_cast<Pattern>(idler.t.rows())) throw DataError("record pattern does not fit the detector");
  }
  if (opt.cross_mode) {
    opt.cross_mode->validate();
    if (opt.cross_mode->signal.bins_per_mode != bs || opt.cross_mode->idler.bins_per_mode != idler.bins) {
      throw ConfigError("cross-mode detector does not match the response bins");
    }
  }
  RowFn row = [&](Pattern p) {
    Eigen::RowVectorXd r(unknowns);
    const Pattern s = p & mask;
    const Pattern i = p >> bs;
    const auto ts = signal.t.row(s);
    Eigen::RowVectorXd ti = Eigen::RowVectorXd::Zero(cols);
    if (opt.cross_mode) {
      // Idler patterns i' that become i once the afterpulse bits x are ORed in.
      for (const auto& [x, q] : cross_mode_kernel(s, *opt.cross_mode)) {
        if ((x & i) != x) continue;
        for (Pattern y = x;; y = (y - 1) & x) {
          ti += q * idler.t.row((i & ~x) | y).head(cols);
          if (y == 0) break;
        }
      }
    } else {
      ti = idler.t.row(i).head(cols);
    }
    for (int m = 0; m <= opt.n_s; ++m) {
      for (int n = 0; n < cols; ++n) r[m * cols + n] = ts[m] * ti[n];
    }
    return r;
  };
  MapFn to_joint = [&](const Eigen::VectorXd& x) {
    Eigen::MatrixXd p(opt.n_s + 1, cols);
    for (int m = 0; m <= opt.n_s; ++m) {
      for (int n = 0; n < cols; ++n) p(m, n) = x[m * cols + n];
    }
    return p;
  };
  return bootstrap_fit(record, row, unknowns, to_joint, opt, seed);
}

Reconstruction fit_state_mixture(const ClickRecord& record, const ProbeSet& probes, const FitOptions& opt,
                                 std::uint64_t seed) {
  probes.validate();
  if (probes.probes.empty()) throw DataError("probe library is empty");
  const int bs = probes.tmd.signal.bins_per_mode;
  const Pattern mask = static_cast<Pattern>((1u << bs) - 1);
  const int k = static_cast<int>(probes.probes.size());
  RowFn row = [&](Pattern p) {
    Eigen::RowVectorXd r(k);
    for (int j = 0; j < k; ++j) r[j] = probes.probes[j].freq_s[p & mask] * probes.probes[j].freq_i[p >> bs];
    return r;
  };
  Eigen::MatrixXd ps(opt.n_s + 1, k);
  Eigen::MatrixXd pi(opt.n_i + 1, k);
  for (int j = 0; j < k; ++j) {
    const auto& pr = probes.probes[j];
    const auto s = poisson_dist(pr.amp_s * pr.amp_s, opt.n_s, 1.0);
    const auto i = poisson_dist(pr.amp_i * pr.amp_i, opt.n_i, 1.0);
    for (int m = 0; m <= opt.n_s; ++m) ps(m, j) = s.probs[m];
    for (int n = 0; n <= opt.n_i; ++n) pi(n, j) = i.probs[n];
  }
  MapFn to_joint = [&](const Eigen::VectorXd& c) { return Eigen::MatrixXd(ps * c.asDiagonal() * pi.transpose()); };
  return bootstrap_fit(record, row, k, to_joint, opt, seed);
}

Estimate functional_estimate(const Reconstruction& rec, const std::function<double(const JointDist&)>& f) {
  Estimate e;
  e.value = f(rec.p);
  if (rec.replicas.size() > 1) {
    double mean = 0.0;
    std::vector<double> v;
    for (const auto& r : rec.replicas) v.push_back(f(r));
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    e.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return e;
}

Estimate parity_from_reconstruction(const Reconstruction& rec) { return functional_estimate(rec, joint_parity); }

}  // namespace wigprobe
