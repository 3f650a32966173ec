#include "apgauge/errors.hpp"
#include "apgauge/spectra.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace apgauge;
using testutil::cosine_symbol;

namespace {

Operator mathieu_1d(double amplitude = 1.0) {
  const auto m = FrequencyModule::integer_lattice(1);
  return {BaseSymbol::isotropic(1), cosine_symbol(m, {{Coords{1}, CoefficientFn::constant(amplitude)}})};
}

Operator cosines_2d() {
  const auto m = FrequencyModule::integer_lattice(2);
  return {BaseSymbol::isotropic(2), cosine_symbol(m, {{Coords{1, 0}, CoefficientFn::constant(1.0)},
                                                      {Coords{0, 1}, CoefficientFn::constant(1.0)}})};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Brute-force midpoint count of {a <= tau} over a box, independent of the
// adaptive quadrature.
double midpoint_volume(const XiFunction& a, double tau, const Box& box, int n) {
  const Vec step = (box.hi - box.lo) / n;
  double count = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (a(make_vec({box.lo[0] + (i + 0.5) * step[0], box.lo[1] + (j + 0.5) * step[1]})) <= tau) count += 1.0;
  return count * step.prod();
}

}  // namespace

TEST_CASE("kappa0_volume of the free symbol") {
  const double h = 0.1;
  CHECK(std::abs(kappa0_volume(BaseSymbol::isotropic(1), 1.0, h) - 10.0 / kPi) < 1e-8);
  const double disc = kappa0_volume(BaseSymbol::isotropic(2), 1.0, h);
  CHECK(rel(disc, kPi / std::pow(2 * kPi * h, 2)) < 1e-5);
  CHECK(disc == doctest::Approx(7.9577).epsilon(1e-4));
  CHECK(kappa0_volume(BaseSymbol::isotropic(1), -0.1, h) == 0.0);
  CHECK(kappa0_volume(BaseSymbol::isotropic(2), -0.1, h) == 0.0);
}

TEST_CASE("kappa0_volume of a non-convex level set matches a midpoint count") {
  // two wells: {(xi1^2 - 1)^2 + xi2^2 <= 0.3}
  const XiFunction a = [](const Vec& x) { return (x[0] * x[0] - 1) * (x[0] * x[0] - 1) + x[1] * x[1]; };
  const Box box{make_vec({-2.0, -1.0}), make_vec({2.0, 1.0})};
  const double h = 0.2;
  const double got = kappa0_volume(a, 2, 0.3, h, box);
  const double want = midpoint_volume(a, 0.3, box, 2000) / std::pow(2 * kPi * h, 2);
  CHECK(rel(got, want) < 2e-4);
}

TEST_CASE("kappa0_volume rejects bad input") {
  const Box box{make_vec({-1.0}), make_vec({1.0})};
  const XiFunction a = [](const Vec& x) { return x[0] * x[0]; };
  CHECK_THROWS_AS(kappa0_volume(a, 1, 1.0, 0.0, box), ConfigError);
  CHECK_THROWS_AS(kappa0_volume(a, 2, 1.0, 0.1, box), ConfigError);
  QuadratureControls q;
  q.max_refine = 0;
  const Box box2{make_vec({-2.0, -2.0}), make_vec({2.0, 2.0})};
  CHECK_THROWS_AS(kappa0_volume([](const Vec& x) { return x.squaredNorm(); }, 2, 1.0, 0.1, box2, q),
                  QuadratureError);
}

TEST_CASE("eps = 0 reduces to the free volume") {
  const Operator op = mathieu_1d();
  const auto r = ids_pipeline(op, 0.0, 0.1, 1.0);
  CHECK(r.value == kappa0_volume(op.a0, 1.0, 0.1));
  REQUIRE(r.zones.size() == 1);
  CHECK(r.zones[0].zone == "free");
  const auto r2 = ids_pipeline(cosines_2d(), 0.0, 0.1, 1.0);
  CHECK(r2.value == kappa0_volume(BaseSymbol::isotropic(2), 1.0, 0.1));
}

TEST_CASE("cosine potential: two gauge steps within 0.5% of the Bloch count") {
  const Operator op = mathieu_1d();
  const double h = 0.1, eps = 0.1;
  const double ref = BlochOracle(op, h, eps, 1.0).ids(1.0);
  const auto r = ids_pipeline(op, eps, h, 1.0);
  CHECK(rel(r.value, ref) <= 5e-3);
  CHECK(r.support_exact);
  CHECK(r.steps == 2);
  // zone sums are the reported total, bit for bit
  double s = 0.0;
  for (const auto& z : r.zones) s += z.value;
  CHECK(s == r.value);
}

TEST_CASE("ids_pipeline is nondecreasing in tau and zero below the spectrum") {
  const Operator op = mathieu_1d();
  const double h = 0.1, eps = 0.1;
  double prev = 0.0;
  for (int i = 0; i <= 8; ++i) {
    const double tau = 0.5 + 0.125 * i;
    const auto r = ids_pipeline(op, eps, h, tau);
    CHECK(r.value >= prev);
    CHECK(r.value >= 0.0);
    double s = 0.0;
    for (const auto& z : r.zones) s += z.value;
    CHECK(s == r.value);
    prev = r.value;
  }
  // inf A0 - eps sup|B| = -0.2
  const auto below = ids_pipeline(op, eps, h, -0.25);
  CHECK(below.value == 0.0);
  CHECK(below.zones.at(0).zone == "below_spectrum");
}

TEST_CASE("resonant level set in d = 1 is refused") {
  // the theta = 1 resonance sits at xi = h/2
  CHECK_THROWS_AS(ids_pipeline(mathieu_1d(), 0.1, 0.1, 0.0025), UnsupportedError);
}

TEST_CASE("eps -> 0 continuity") {
  const Operator op = mathieu_1d();
  const double h = 0.1;
  const double free = ids_pipeline(op, 0.0, h, 1.0).value;
  for (double s : {1e-3, 1e-4}) {
    const double eps = s * h;
    const double C = std::abs(ids_pipeline(op, eps, h, 1.0).value - free) / (eps / h);
    CHECK(C <= 1.0);
  }
}

TEST_CASE("spectral function against Bloch eigenfunction sums") {
  const Operator op = mathieu_1d();
  const double h = 0.1, eps = 0.1, tau = 1.0;
  const auto params = pipeline_params(op, eps, h, 2);
  const std::vector<double> xs{0.0, kPi / 2, kPi};
  const auto got = spectral_function_leading(xs, tau, op, eps, h, params);
  std::vector<Vec> X;
  for (double x : xs) X.push_back(make_vec({x}));
  const auto want = BlochOracle(op, h, eps, tau).spectral_function(X, tau);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(rel(got[i], want[i]) <= 2e-2);
  // the potential makes the kernel x-dependent
  CHECK(std::abs(got[0] - got[2]) > 1e-3 * got[0]);

  // mean over one period
  const int n = 64;
  std::vector<double> grid;
  for (int i = 0; i < n; ++i) grid.push_back(2 * kPi * i / n);
  const auto vals = spectral_function_leading(grid, tau, op, eps, h, params);
  double mean = 0.0;
  for (double v : vals) mean += v / n;
  CHECK(rel(mean, ids_pipeline(op, eps, h, tau, params).value) <= 1e-3);
}

TEST_CASE("spectral function is flat without a potential") {
  const Operator op = mathieu_1d();
  const auto v = spectral_function_leading({0.0, 1.0, 2.5}, 1.0, op, 0.0, 0.1, pipeline_params(op, 0.0, 0.1, 2));
  for (double x : v) CHECK(x == kappa0_volume(op.a0, 1.0, 0.1));
  CHECK_THROWS_AS(spectral_function_leading(0.0, 1.0, cosines_2d(), 0.1, 0.1), UnsupportedError);
}

TEST_CASE("resonant fibers: free case, disjoint window and windowed Bloch count") {
  const Operator op = cosines_2d();
  const auto m = op.module();
  const auto& a0 = op.a0;

  SUBCASE("eps = 0 gives the component's share of the volume") {
    const double h = 0.05;
    const auto p = ZoneParams::defaults(2, h, h, 2, 0.5);
    const auto z = classify(a0, make_shell(a0, 1.0, p), *m, sumset(*m, 1), p);
    REQUIRE(!z.components.empty());
    const GaugeChain none(m);
    for (const auto& comp : z.components) {
      if (comp.level != 1) continue;
      double share = 0.0;
      for (std::size_t pos : comp.cells) {
        const Vec c = z.shell.center(z.shell.cells[pos]);
        const Vec half = Vec::Constant(2, z.shell.step / 2);
        share += midpoint_volume([&](const Vec& x) { return a0(x); }, 1.0, Box{c - half, c + half}, 64);
      }
      share /= std::pow(2 * kPi * h, 2);
      CHECK(rel(resonant_fiber_ids(z, comp.id, none, a0, 1.0, h), share) <= 5e-3);
      // below every cell of the component
      CHECK(resonant_fiber_ids(z, comp.id, none, a0, 0.5, h) == 0.0);
    }
    CHECK_THROWS_AS(resonant_fiber_ids(z, 999, none, a0, 1.0, h), ConfigError);
  }

  SUBCASE("windowed Bloch count on one component") {
    const double h = 0.2, eps = 0.02;
    const auto p = pipeline_params(op, eps, h, 2);
    const auto z = classify(a0, make_shell(a0, 1.0, p), *m, sumset(*m, 1), p);
    REQUIRE(!z.components.empty());
    const auto& comp = z.components.front();
    REQUIRE(comp.level == 1);
    const PipelineControls ctl;
    const auto chain = eliminate(a0, op.b, eps, h, GaugeTarget::resonant(z, comp.id), p, ctl.resonant_gauge);
    CHECK(chain.support_exact());
    const double got = resonant_fiber_ids(z, comp.id, chain, a0, 1.0, h, ctl);
    OracleControls oc;
    oc.k_points = 16;
    const double want = BlochOracle(op, h, eps, 1.0, oc).windowed_ids(1.0, [&](const Vec& xi) {
      const auto pos = z.shell.locate(xi);
      return pos && z.component[*pos] == comp.id ? 1.0 : 0.0;
    });
    // the oracle's sharp window moves ~2% between 8, 16 and 32 k-points
    CHECK(rel(got, want) <= 2.5e-2);
  }
}

TEST_CASE("convergence study table") {
  const Operator op = mathieu_1d();
  const std::vector<double> hs{0.2, 0.1, 0.05};

  SUBCASE("free rows are exact") {
    const auto t = convergence_study(op, 1.0, hs, EpsLaw{0.0, 1.0}, {0});
    REQUIRE(t.rows.size() == 3);
    for (const auto& r : t.rows) {
      CHECK(r.abs_err <= 1e-8);
      CHECK(r.n_pipeline == doctest::Approx(1.0 / (kPi * r.h)).epsilon(1e-10));
    }
  }

  SUBCASE("K = 2 gains on K = 1") {
    const auto t = convergence_study(op, 1.0, hs, EpsLaw{1.0, 1.0}, {1, 2});
    REQUIRE(t.rows.size() == 6);
    REQUIRE(t.slopes.size() == 2);
    CHECK(t.slopes[0].K == 1);
    CHECK(t.slopes[0].increment == 0.0);
    CHECK(t.slopes[1].increment == doctest::Approx(t.slopes[1].slope - t.slopes[0].slope));
    CHECK(t.slopes[1].increment >= 0.5);
    for (const auto& r : t.rows) CHECK(r.abs_err == std::abs(r.n_pipeline - r.n_oracle));

    const std::string csv = t.csv();
    CHECK(csv.rfind("h,epsilon,tau,K,n_pipeline,n_oracle,abs_err,", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    const std::string jl = t.slopes_jsonl();
    CHECK(std::count(jl.begin(), jl.end(), '\n') == 2);
    CHECK(jl.find("\"K\":2") != std::string::npos);
  }

  SUBCASE("non-periodic modules flag every row") {
    Eigen::MatrixXd G(1, 2);
    G << 1.0, (1 + std::sqrt(5.0)) / 2;
    const auto gm = std::make_shared<const FrequencyModule>(
        G, std::vector<Coords>{{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}});
    const Operator q{BaseSymbol::isotropic(1), cosine_symbol(gm, {{Coords{1, 0}, CoefficientFn::constant(0.5)},
                                                                  {Coords{0, 1}, CoefficientFn::constant(0.5)}})};
    const auto t = convergence_study(q, 1.0, {0.1, 0.05, 0.025}, EpsLaw{1.0, 1.0}, {1});
    for (const auto& r : t.rows) {
      CHECK(r.flagged);
      CHECK(r.flag.find(',') == std::string::npos);
    }
    REQUIRE(t.slopes.size() == 1);
    CHECK(t.slopes[0].points == 0);
  }

  CHECK_THROWS_AS(convergence_study(op, 1.0, {0.1, 0.05}, EpsLaw{}, {1}), ConfigError);
  CHECK_THROWS_AS(convergence_study(op, 1.0, hs, EpsLaw{}, {}), ConfigError);
}

TEST_CASE("loglog_slope recovers power laws") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double p = u(rng), c = std::exp(u(rng));
    std::vector<double> x, y;
    for (double v : {0.2, 0.1, 0.05, 0.025}) {
      x.push_back(v);
      y.push_back(c * std::pow(v, p));
    }
    CHECK(loglog_slope(x, y) == doctest::Approx(p).epsilon(1e-12));
  }
  CHECK(loglog_slope({1.0, 2.0, 4.0}, {0.0, 2.0, 4.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(loglog_slope({1.0, 2.0}, {1.0}), ConfigError);
  CHECK_THROWS_AS(loglog_slope({1.0, 1.0}, {1.0, 2.0}), ConfigError);
}
