#include <doctest.h>

#include <cmath>
#include <complex>

#include <unsupported/Eigen/MatrixFunctions>

#include "generators.hpp"
#include "wigprobe/fock.hpp"

using namespace wigprobe;

namespace {

// |<n|D(amp)|k>|^2 from the matrix exponential of the truncated ladder.
Eigen::MatrixXd kernel_by_expm(double amp, int dim) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  const Eigen::MatrixXd gen = amp * (a.transpose() - a);
  const Eigen::MatrixXd d = gen.exp();
  return d.cwiseAbs2();
}

// Poisson weights by the product recursion p_n = p_{n-1} mu / n.
std::vector<double> poisson_by_recursion(double mu, int n_max) {
  std::vector<double> p(n_max + 1);
  p[0] = std::exp(-mu);
  for (int n = 1; n <= n_max; ++n) p[n] = p[n - 1] * mu / n;
  return p;
}

}  // namespace

TEST_CASE("poisson_dist") {
  SUBCASE("vacuum at zero mean") {
    const auto p = poisson_dist(0.0, 10);
    CHECK(p.probs[0] == 1.0);
    CHECK(p.total() == 1.0);
  }
  SUBCASE("matches the product recursion") {
    const auto p = poisson_dist(1.0, 30);
    CHECK(p.probs[0] == doctest::Approx(0.367879).epsilon(1e-6));
    const auto ref = poisson_by_recursion(1.0, 30);
    for (int n = 0; n <= 30; ++n) CHECK(std::abs(p.probs[n] - ref[n]) < 1e-15);
  }
  SUBCASE("largest coherent state fits the default ladder") {
    const auto p = poisson_dist(12.25, kDefaultNMax);
    double tail = 0.0;
    const auto ref = poisson_by_recursion(12.25, 400);
    for (int n = kDefaultNMax + 1; n <= 400; ++n) tail += ref[n];
    CHECK(tail < 1e-10);
    CHECK(p.discarded == doctest::Approx(tail).epsilon(1e-6));
  }
  SUBCASE("too short a ladder throws") { CHECK_THROWS_AS(poisson_dist(12.25, 20), TruncationError); }
  SUBCASE("bad mean") { CHECK_THROWS_AS(poisson_dist(-1.0, 10), ConfigError); }
}

TEST_CASE("loss_channel") {
  const auto single = loss_channel(PhotonDist({0.0, 1.0}), 0.75);
  CHECK(single.probs[0] == doctest::Approx(0.25));
  CHECK(single.probs[1] == doctest::Approx(0.75));

  auto g = gen::rng(1);
  const auto p = gen::dist(g, 20);
  CHECK(loss_channel(p, 1.0).probs == p.probs);

  const auto thinned = loss_channel(poisson_dist(3.0, 60), 0.4);
  const auto ref = poisson_dist(1.2, 60);
  for (int n = 0; n <= 60; ++n) CHECK(std::abs(thinned.probs[n] - ref.probs[n]) < 1e-12);

  CHECK_THROWS_AS(loss_channel(p, 1.5), ConfigError);
}

TEST_CASE("loss_channel composes") {
  auto g = gen::rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = gen::dist(g, gen::integer(g, 0, 40));
    const double e1 = gen::uniform(g, 0.0, 1.0);
    const double e2 = gen::uniform(g, 0.0, 1.0);
    const auto two_step = loss_channel(loss_channel(p, e1), e2);
    const auto one_step = loss_channel(p, e1 * e2);
    for (int n = 0; n <= p.n_max(); ++n) CHECK(std::abs(two_step.probs[n] - one_step.probs[n]) < 1e-12);
    CHECK(std::abs(one_step.total() - p.total()) < 1e-12);
    for (double v : one_step.probs) CHECK(v >= 0.0);
  }
}

TEST_CASE("displacement_kernel") {
  SUBCASE("zero amplitude is the identity") {
    const auto k = displacement_kernel(0.0, 60);
    CHECK(k.k == Eigen::MatrixXd::Identity(61, 61));
  }
  SUBCASE("vacuum column is Poisson") {
    const auto k = displacement_kernel(1.0, 40);
    const auto ref = poisson_by_recursion(1.0, 40);
    for (int n = 0; n <= 40; ++n) CHECK(std::abs(k.k(n, 0) - ref[n]) < 1e-15);
    CHECK(k.k(0, 1) == doctest::Approx(0.367879).epsilon(1e-6));
  }
  SUBCASE("agrees with the truncated matrix exponential") {
    for (double amp : {0.3, 1.0, 2.2}) {
      const auto k = displacement_kernel(amp, 30);
      const Eigen::MatrixXd ref = kernel_by_expm(amp, 120);
      for (int n = 0; n <= 30; ++n) {
        for (int c = 0; c <= 30; ++c) CHECK(std::abs(k.k(n, c) - ref(n, c)) < 1e-12);
      }
    }
  }
  SUBCASE("|<1|D(1)|1>|^2 vanishes") {
    const auto k = displacement_kernel(1.0, 40);
    CHECK(std::abs(k.k(1, 1)) < 1e-15);
    CHECK(std::abs(kernel_by_expm(1.0, 80)(1, 1)) < 1e-12);
  }
  SUBCASE("large amplitude uses rescaling without overflow") {
    const auto k = displacement_kernel(3.5, 60);
    CHECK(k.column_mass[0] > 1.0 - 1e-10);
    CHECK(k.audited_columns > 0);
    CHECK(k.k.allFinite());
    const auto ref = poisson_dist(12.25, 60);
    for (int n = 0; n <= 60; ++n) CHECK(std::abs(k.k(n, 0) - ref.probs[n]) < 1e-14);
  }
  SUBCASE("vacuum leak throws") { CHECK_THROWS_AS(displacement_kernel(4.0, 20), TruncationError); }
}

TEST_CASE("displacement kernel properties") {
  auto g = gen::rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const double amp = gen::uniform(g, 0.0, 3.5);
    const auto k = displacement_kernel(amp, 60);
    CHECK((k.k.array() >= 0.0).all());
    CHECK((k.k.array() <= 1.0 + 1e-15).all());
    CHECK((k.k - k.k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    for (int c = 0; c < k.audited_columns; ++c) CHECK(k.column_mass[c] >= 1.0 - kTailTol);
    CHECK(k.column_mass[0] <= 1.0 + 1e-12);
  }
}

TEST_CASE("apply_displacement") {
  const auto k = displacement_kernel(1.7, 60);
  const auto coh = apply_displacement(PhotonDist::vacuum(60), k);
  const auto ref = poisson_dist(1.7 * 1.7, 60);
  for (int n = 0; n <= 60; ++n) CHECK(std::abs(coh.probs[n] - ref.probs[n]) < 1e-14);

  auto g = gen::rng(4);
  const auto p = gen::dist(g, 15);
  const auto same = apply_displacement(p, displacement_kernel(0.0, 15));
  CHECK(same.probs == p.probs);

  const auto one = apply_displacement(PhotonDist::fock(1, 40), displacement_kernel(1.0, 40));
  CHECK(std::abs(one.probs[1]) < 1e-15);

  // A high Fock state near the end of the ladder leaks.
  CHECK_THROWS_AS(apply_displacement(PhotonDist::fock(55, 60), displacement_kernel(2.0, 60)), TruncationError);
}

TEST_CASE("parity of displaced vacuum") {
  for (double amp = 0.0; amp <= 2.5; amp += 0.25) {
    const auto p = apply_displacement(PhotonDist::vacuum(60), displacement_kernel(amp, 60));
    CHECK(std::abs(parity(p) - std::exp(-2.0 * amp * amp)) < 1e-10);
  }
}

TEST_CASE("convolve") {
  auto g = gen::rng(5);
  const auto q = gen::dist(g, 12);
  CHECK(convolve(PhotonDist::vacuum(12), q).probs == q.probs);

  const auto shifted = convolve(PhotonDist({0.0, 1.0}), poisson_dist(2.0, 40), 41);
  const auto pois = poisson_dist(2.0, 40);
  for (int n = 1; n <= 41; ++n) CHECK(shifted.probs[n] == pois.probs[n - 1]);
  CHECK(shifted.probs[0] == 0.0);

  const auto sum = convolve(poisson_dist(1.5, 60), poisson_dist(2.5, 60), 60);
  const auto ref = poisson_dist(4.0, 60);
  for (int n = 0; n <= 60; ++n) CHECK(std::abs(sum.probs[n] - ref.probs[n]) < 1e-12);

  CHECK_THROWS_AS(convolve(PhotonDist::fock(10, 10), PhotonDist::fock(10, 10), 15), TruncationError);
}

TEST_CASE("convolve is commutative and associative") {
  auto g = gen::rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = gen::dist(g, gen::integer(g, 0, 10));
    const auto b = gen::dist(g, gen::integer(g, 0, 10));
    const auto c = gen::dist(g, gen::integer(g, 0, 10));
    const int n = 40;
    const auto ab = convolve(a, b, n);
    const auto ba = convolve(b, a, n);
    const auto ab_c = convolve(ab, c, n);
    const auto a_bc = convolve(a, convolve(b, c, n), n);
    for (int k = 0; k <= n; ++k) {
      CHECK(std::abs(ab.probs[k] - ba.probs[k]) < 1e-12);
      CHECK(std::abs(ab_c.probs[k] - a_bc.probs[k]) < 1e-12);
      CHECK(ab_c.probs[k] >= 0.0);
    }
  }
}

TEST_CASE("parity") {
  CHECK(parity(PhotonDist::vacuum(5)) == 1.0);
  CHECK(parity(PhotonDist({0.25, 0.75})) == doctest::Approx(-0.5));
  const auto p = poisson_dist(1.0, 60);
  CHECK(std::abs(parity(p) - 0.135335283236613) < 1e-12);
}

TEST_CASE("validate and truncate") {
  CHECK_THROWS_AS(validate(PhotonDist({0.5, 0.4})), ConfigError);
  CHECK_THROWS_AS(validate(PhotonDist({1.1, -0.1})), ConfigError);
  CHECK_NOTHROW(validate(poisson_dist(3.0, 60)));
  const auto t = truncate(poisson_dist(0.5, 60), 30);
  CHECK(t.n_max() == 30);
  CHECK(t.discarded < 1e-20);
  CHECK_THROWS_AS(truncate(poisson_dist(5.0, 60), 5), TruncationError);
}
