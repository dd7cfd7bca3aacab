#include <doctest.h>

#include <cmath>
#include <numbers>

#include "generators.hpp"
#include "wigprobe/calib.hpp"
#include "wigprobe/errors.hpp"

using namespace wigprobe;

namespace {

Tmd quiet_tmd() {
  Tmd t;
  t.signal.p_ap = 0.0;
  t.idler.p_ap = 0.0;
  return t;
}

Pattern joint(Pattern s, Pattern i) { return s | (i << 8); }

}  // namespace

TEST_CASE("estimate_displacement inverts the Poisson-thinned zero-click curve") {
  const auto lib = build_probe_library(probe_grid(71, 3.5, 9, 3.5), quiet_tmd(), 0, 1);
  CHECK(estimate_displacement(1.0, lib) < 1e-6);
  // p0 = exp(-eta_d amp^2) with eta_d = 0.2.
  CHECK(estimate_displacement(std::exp(-0.2), lib) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(estimate_displacement(std::exp(-0.2 * 6.25), lib) == doctest::Approx(2.5).epsilon(1e-9));
  CHECK(estimate_displacement(std::exp(-0.2 * 4.0), lib, 1) == doctest::Approx(2.0).epsilon(1e-9));
  // Below the largest probe (amp 3.5) is extrapolation.
  CHECK_THROWS_AS(estimate_displacement(std::exp(-0.2 * 16.0), lib), DataError);
  CHECK_THROWS_AS(estimate_displacement(0.0, lib), ConfigError);
}

TEST_CASE("reference beam at amp 2 calibrates back to 2 within 0.02") {
  const Tmd tmd;
  const auto lib = build_probe_library(probe_grid(71, 3.5, 9, 3.5), tmd, 1000000, 11);
  const auto rec = sample_patterns(JointDist::product(poisson_dist(4.0, 60), PhotonDist::vacuum(0)), tmd, 1000000, 12);
  const double amp = estimate_displacement(zero_click_fraction(rec, tmd), lib);
  CHECK(std::abs(amp - 2.0) < 0.02);
}

TEST_CASE("zero_click_fraction and idler_singles_rate count per mode") {
  const Tmd tmd;
  ClickRecord rec;
  rec.add(joint(0, 0), 5);
  rec.add(joint(0x1, 0), 2);
  rec.add(joint(0, 0x4), 1);
  rec.add(joint(0x3, 0x10), 1);
  rec.add(joint(0, 0x6), 1);
  CHECK(zero_click_fraction(rec, tmd, 0) == doctest::Approx(7.0 / 10));
  CHECK(zero_click_fraction(rec, tmd, 1) == doctest::Approx(7.0 / 10));
  CHECK(idler_singles_rate(rec, tmd) == doctest::Approx(2.0 / 10));
}

TEST_CASE("pattern_deviance vanishes at the empirical distribution") {
  ClickRecord rec;
  rec.add(0, 30);
  rec.add(1, 10);
  PatternDist exact({0.75, 0.25, 0.0, 0.0}, 2);
  CHECK(pattern_deviance(rec, exact) == doctest::Approx(0.0).epsilon(1e-14));
  PatternDist half({0.5, 0.5, 0.0, 0.0}, 2);
  const double g2 = 2 * (30 * std::log(30.0 / 20) + 10 * std::log(10.0 / 20));
  CHECK(pattern_deviance(rec, half) == doctest::Approx(g2).epsilon(1e-12));
}

TEST_CASE("fit_source recovers r and eta from a sampled record") {
  const Tmd tmd;
  const auto rec = sample_from(source_patterns(0.6, 0.75, 0.75, tmd), 1000000, 3);
  const auto fit = fit_source(rec, tmd);
  CHECK(std::abs(fit.r_hat - 0.6) < 0.03);
  CHECK(std::abs(fit.eta_hat - 0.75) < 0.05);
  CHECK(fit.eta_i_hat == fit.eta_hat);
  CHECK_FALSE(fit.on_boundary);
  // Coarse grid, two refinements, then the eta scan at r_hat.
  CHECK(fit.evaluations == 31 * 21 + 2 * 11 * 11 + 21);
}

TEST_CASE("fit_afterpulse recovers an exact line") {
  std::vector<std::pair<double, double>> pts;
  for (double a2 : {0.0, 1.0, 2.0, 4.0}) pts.emplace_back(a2, 0.05 + 0.003 * a2);
  const auto fit = fit_afterpulse(pts);
  CHECK(fit.c == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(fit.s == doctest::Approx(0.003).epsilon(1e-12));
  CHECK(fit.r_squared == doctest::Approx(1.0));
  CHECK(fit.warning.empty());
  CHECK(fit.x(2.0) == doctest::Approx(0.012 / 0.062));
  CHECK(fit.x(0.0) == 0.0);

  std::vector<std::pair<double, double>> falling{{0.0, 0.05}, {1.0, 0.04}, {2.0, 0.03}};
  const auto neg = fit_afterpulse(falling);
  CHECK_FALSE(neg.warning.empty());
  CHECK(neg.x(1.0) == 0.0);

  CHECK_THROWS_AS(fit_afterpulse({{0.0, 0.1}, {1.0, 0.2}}), DataError);
  CHECK_THROWS_AS(fit_afterpulse({{1.0, 0.1}, {1.0, 0.2}, {1.0, 0.3}}), DataError);
}

TEST_CASE("herald_signal follows the mixed single-detection operator") {
  auto g = gen::rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = gen::joint(g, gen::integer(g, 1, 6), gen::integer(g, 1, 5));
    const double x = gen::uniform(g, 0.0, 0.9);
    const auto h = herald_signal(p, x);
    // Direct weights of (1 - x) |1><1|_idler + x |1><1|_signal.
    std::vector<double> w(p.n_max_s() + 1, 0.0);
    double norm = 0.0;
    for (int m = 0; m <= p.n_max_s(); ++m) {
      for (int n = 0; n <= p.n_max_i(); ++n) {
        const double e = (1 - x) * (n == 1) + x * (m == 1);
        // The signal projector leaves the signal in |1>, the idler one keeps m.
        const double to_m = (1 - x) * (n == 1) * p.probs(m, n);
        const double to_1 = x * (m == 1) * p.probs(m, n);
        w[m] += to_m;
        w[1] += to_1;
        norm += e * p.probs(m, n);
      }
    }
    for (int m = 0; m <= p.n_max_s(); ++m) CHECK(h[m] == doctest::Approx(w[m] / norm).epsilon(1e-12));
  }
  CHECK_THROWS_AS(herald_signal(JointDist::vacuum(3), 0.0), NumericalError);
  CHECK_THROWS_AS(herald_signal(tmsv_joint(0.5, 20), 1.0), ConfigError);
}

TEST_CASE("herald_from_record counts signal clicks after one idler click") {
  const Tmd tmd;
  ClickRecord rec;
  rec.add(joint(0, 0x1), 4);
  rec.add(joint(0x1, 0x1), 3);
  rec.add(joint(0x5, 0x80), 1);
  rec.add(joint(0x1, 0x3), 7);
  rec.add(joint(0x1, 0), 9);
  const auto h = herald_from_record(rec, tmd);
  CHECK(h[0] == doctest::Approx(0.5));
  CHECK(h[1] == doctest::Approx(0.375));
  CHECK(h[2] == doctest::Approx(0.125));
  ClickRecord none;
  none.add(0, 3);
  CHECK_THROWS_AS(herald_from_record(none, tmd), DataError);
}

TEST_CASE("wigner_point scales parity by the mode-count convention") {
  CHECK(wigner_point(1.0) == doctest::Approx(4 / (std::numbers::pi * std::numbers::pi)));
  CHECK(wigner_point(-0.5, WignerConvention::single_mode) == doctest::Approx(-1 / std::numbers::pi));
}

TEST_CASE("fit_gaussian recovers amplitude and variance of an exact Gaussian") {
  std::vector<double> x, y;
  for (int k = 0; k <= 20; ++k) {
    x.push_back(0.1 * k);
    y.push_back(0.8 * std::exp(-x.back() * x.back() / (2 * 0.3)));
  }
  const auto g = fit_gaussian(x, y);
  CHECK(g.amplitude == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(g.variance == doctest::Approx(0.3).epsilon(1e-12));
  CHECK_THROWS_AS(fit_gaussian({0.0}, {1.0}), NumericalError);
}
