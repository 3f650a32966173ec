#include "apgauge/errors.hpp"
#include "apgauge/zones.hpp"

#include <doctest.h>

#include <random>

using namespace apgauge;

namespace {

ModulePtr module_2d(std::vector<Coords> f) {
  return std::make_shared<FrequencyModule>(Eigen::MatrixXd::Identity(2, 2), std::move(f));
}

// Params with gamma_1 forced to a given value.
ZoneParams with_gamma(int d, double h, double eps, double gamma, double C0) {
  ZoneParams p = ZoneParams::defaults(d, eps, h, 2, C0 / 2);
  p.c = gamma / (std::sqrt(p.eps_zone()) * std::pow(h, -p.delta[0]));
  return p;
}

}  // namespace

TEST_CASE("zone parameter defaults and validation") {
  const auto p = ZoneParams::defaults(1, 0.1, 0.1, 2, 2.0);
  CHECK(p.vartheta == doctest::Approx(1.0));
  REQUIRE(p.delta.size() == 1);
  CHECK(p.delta[0] == doctest::Approx(1.0 / 12));
  CHECK(p.varsigma == doctest::Approx(1.0 / 24));
  CHECK(p.sigma == doctest::Approx(1.0 / 48));
  CHECK(p.C0 == 4.0);
  CHECK(p.gamma(1) == doctest::Approx(std::sqrt(0.1) * std::pow(0.1, -1.0 / 12)));
  CHECK_NOTHROW(p.validate());

  const auto p2 = ZoneParams::defaults(3, 0.01, 0.1, 3, 1.0);
  CHECK(p2.delta.size() == 2);
  CHECK(p2.vartheta == doctest::Approx(1.0));  // eps < h: sized by h
  CHECK(ZoneParams::defaults(2, 0.01, 0.001, 1, 1.0).vartheta == doctest::Approx(2.0 / 3));
  CHECK(p2.gamma(2) > p2.gamma(1));
  CHECK_NOTHROW(p2.validate());

  // below h the zone scale is set by h
  const auto p3 = ZoneParams::defaults(1, 0.0, 0.05, 0, 1.0);
  CHECK(p3.eps_zone() == 0.05);
  CHECK_NOTHROW(p3.validate());

  ZoneParams bad = p;
  bad.vartheta = 2.0;  // h^2 < eps
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.varsigma = bad.delta[0];
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p;
  bad.c = 10.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = p2;
  std::swap(bad.delta[0], bad.delta[1]);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("energy shell sampling") {
  const auto a0 = BaseSymbol::isotropic(2);
  const auto p = ZoneParams::defaults(2, 0.02, 0.02, 2, 1.0);
  const auto s = make_shell(a0, 1.0, p);
  CHECK(s.width == doctest::Approx(p.C0 * 0.02 + std::pow(0.02, 1 - p.varsigma)));
  CHECK(s.step == doctest::Approx(std::min(p.gamma(1) / 8, p.shell_scale() / 4)));
  REQUIRE(!s.cells.empty());
  CHECK(std::is_sorted(s.cells.begin(), s.cells.end()));
  const double R = a0.radius_bound(1.0 + s.width);
  for (std::size_t c : s.cells) {
    const Vec xi = s.center(c);
    CHECK(std::abs(a0(xi) - 1.0) <= s.width);
    CHECK(xi.norm() <= R);
  }
  // area of the annulus
  const double area = kPi * (2 * s.width);
  CHECK(std::abs(s.cells.size() * s.cell_volume() - area) / area < 0.02);
  // locate round-trips
  for (std::size_t i = 0; i < s.cells.size(); i += 97) CHECK(s.locate(s.center(s.cells[i])) == i);
  CHECK(!s.locate(make_vec({0.0, 0.0})));
}

TEST_CASE("microhyperbolicity margin") {
  const auto iso = BaseSymbol::isotropic(2);
  const auto p = ZoneParams::defaults(2, 0.01, 0.01, 2, 0.5);
  const auto s1 = make_shell(iso, 1.0, p);
  CHECK(std::abs(microhyperbolicity_margin(iso, 1.0, s1) - 2.0) < 0.05);
  const auto s0 = make_shell(iso, 0.0, p);
  CHECK(microhyperbolicity_margin(iso, 0.0, s0) < 3 * s0.step);

  const auto aniso = BaseSymbol::diagonal({1.0, 4.0});
  const auto sa = make_shell(aniso, 1.0, p);
  // min of |grad| on the ellipse x^2 + 4y^2 = 1 is 2, at (+-1, 0)
  double oracle = 1e300;
  for (int i = 0; i < 100000; ++i) {
    const double t = 2 * kPi * i / 100000;
    oracle = std::min(oracle, std::hypot(2 * std::cos(t), 8 * 0.5 * std::sin(t)));
  }
  const double m = microhyperbolicity_margin(aniso, 1.0, sa);
  CHECK(m > 0);
  CHECK(std::abs(m - oracle) < 0.05);
}

TEST_CASE("convexity margin") {
  const auto p = ZoneParams::defaults(2, 0.02, 0.02, 2, 0.5);
  const auto iso = BaseSymbol::isotropic(2);
  CHECK(convexity_margin(iso, 1.0, make_shell(iso, 1.0, p)) == doctest::Approx(2.0).epsilon(1e-12));

  const auto aniso = BaseSymbol::diagonal({1.0, 4.0});
  const double m = convexity_margin(aniso, 1.0, make_shell(aniso, 1.0, p));
  // tangential Hessian on the ellipse is 32 / (16 sin^2 + 4 cos^2), minimum 2
  CHECK(m >= 2.0 - 1e-9);
  CHECK(m < 2.01);

  const auto flat = BaseSymbol::diagonal({1.0, 0.0});
  const Box box = make_box(make_vec({-2, -2}), make_vec({2, 2}));
  CHECK(std::abs(convexity_margin(flat, 1.0, make_shell(flat, 1.0, p, 0.0, box))) < 1e-12);

  const auto one = BaseSymbol::isotropic(1);
  CHECK(std::isinf(convexity_margin(one, 1.0, make_shell(one, 1.0, p))));
}

TEST_CASE("d=1: the shell away from critical points is non-resonant") {
  const auto m = FrequencyModule::integer_lattice(1)->with_frequencies({{-2}, {-1}, {0}, {1}, {2}});
  const auto set = sumset(*m, 1);
  const auto a0 = BaseSymbol::isotropic(1);
  const auto p = with_gamma(1, 0.05, 0.05, 0.1, 4.0);
  CHECK(p.gamma(1) == doctest::Approx(0.1));
  const auto z = classify(a0, make_shell(a0, 1.0, p), *m, set, p);
  CHECK(z.components.empty());
  CHECK(z.resonant_cell_count() == 0);
  // Lambda = {|xi| < 0.05}
  CHECK(resonance_level(a0, make_vec({0.049}), *m, set.nonzero(), p).first == 1);
  CHECK(resonance_level(a0, make_vec({0.051}), *m, set.nonzero(), p).first == 0);
  // a shell around the critical point is resonant
  const auto zc = classify(a0, make_shell(a0, 0.0, p), *m, set, p);
  CHECK(zc.components.size() == 1);
  CHECK(!zc.notes.empty());
}

TEST_CASE("d=2, theta=(1,0): two arc neighbourhoods near xi_1 = 0") {
  const auto m = module_2d({{1, 0}});
  const auto set = sumset(*m, 1);
  const auto a0 = BaseSymbol::isotropic(2);
  const auto p = ZoneParams::defaults(2, 0.02, 0.02, 2, 0.5);
  const auto shell = make_shell(a0, 1.0, p);
  const auto z = classify(a0, shell, *m, set, p);
  REQUIRE(z.components.size() == 2);
  const double g = p.gamma(1);
  for (const auto& c : z.components) {
    CHECK(c.level == 1);
    CHECK(c.V.dim() == 1);
    CHECK(c.V.contains(make_vec({1, 0})));
    CHECK(c.diameter <= p.diameter_factor * p.c * g);
    CHECK(c.inner_max < g);
    CHECK(std::isinf(c.transverse_margin));
  }
  // brute force label check against |2 xi_1| < gamma
  for (std::size_t i = 0; i < shell.cells.size(); ++i) {
    const Vec xi = shell.center(shell.cells[i]);
    CHECK((z.component[i] >= 0) == (std::abs(2 * xi[0]) < g));
  }
  // upper and lower arcs
  CHECK(z.components[0].bbox.hi[1] < 0);
  CHECK(z.components[1].bbox.lo[1] > 0);
}

TEST_CASE("d=2 lattice: level-1 zones only on the unit circle, margins") {
  const auto m = FrequencyModule::integer_lattice(2);
  const auto set = sumset(*m, 1);
  const auto a0 = BaseSymbol::isotropic(2);
  const auto p = ZoneParams::defaults(2, 0.02, 0.02, 2, 0.5);
  const auto z = classify(a0, make_shell(a0, 1.0, p), *m, set, p);
  CHECK(z.components.size() == 4);
  for (const auto& c : z.components) {
    CHECK(c.level == 1);
    // transverse divisors stay away from zero
    CHECK(c.transverse_margin > p.gamma(1));
    CHECK(c.inner_max < p.gamma(1));
  }
  CHECK(z.absorption_passes == 0);
  ZoneDecomposition again = z;
  CHECK(absorb_once(again) == 0);
}

TEST_CASE("d=2 near the critical point: level-2 cells absorb level-1 neighbours") {
  const auto m = FrequencyModule::integer_lattice(2);
  const auto set = sumset(*m, 1);
  const auto a0 = BaseSymbol::isotropic(2);
  auto p = ZoneParams::defaults(2, 0.02, 0.02, 2, 0.5);
  p.diameter_factor = 100;
  const auto shell = make_shell(a0, 0.05, p);
  const auto z = classify(a0, shell, *m, set, p);
  REQUIRE(!z.components.empty());
  int top = 0;
  for (const auto& c : z.components) top = std::max(top, c.level);
  CHECK(top == 2);
  CHECK(z.absorption_passes <= 1);
  // no level-1 component touches a level-2 one after absorption
  ZoneDecomposition again = z;
  CHECK(absorb_once(again) == 0);
  CHECK(again.component == z.component);
}

TEST_CASE("classification properties: determinism, post-hoc non-resonance, monotonicity") {
  const auto m = std::make_shared<FrequencyModule>(Eigen::MatrixXd::Identity(2, 2),
                                                   std::vector<Coords>{{1, 0}, {0, 1}, {1, 1}});
  const auto set = sumset(*m, 2);
  const auto a0 = BaseSymbol::diagonal({1.0, 1.5});
  auto p = ZoneParams::defaults(2, 0.02, 0.02, 2, 0.5);
  p.diameter_factor = 100;
  const auto shell = make_shell(a0, 1.0, p);
  const auto z1 = classify(a0, shell, *m, set, p, 1);
  const auto z2 = classify(a0, shell, *m, set, p, 4);
  CHECK(z1.component == z2.component);
  REQUIRE(z1.components.size() == z2.components.size());
  for (std::size_t i = 0; i < z1.components.size(); ++i) CHECK(z1.components[i].cells == z2.components[i].cells);

  const auto nr = z1.nonresonant_cells();
  REQUIRE(nr.size() > 1000);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, nr.size() - 1);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const Vec xi = shell.center(shell.cells[nr[pick(rng)]]);
    for (const auto& th : set.nonzero())
      if (std::abs(a0.gradient(xi).dot(m->embed(th))) < p.gamma(1)) ++violations;
  }
  CHECK(violations == 0);

  ZoneParams wide = p;
  wide.c = p.c * 1.5;
  const auto zw = classify(a0, shell, *m, set, wide);
  for (std::size_t i = 0; i < z1.component.size(); ++i)
    if (z1.component[i] >= 0) CHECK(zw.component[i] >= 0);
  CHECK(zw.resonant_cell_count() > z1.resonant_cell_count());
}

TEST_CASE("thick shells are reported as decomposition failures") {
  const auto m = FrequencyModule::integer_lattice(2);
  const auto set = sumset(*m, 1);
  const auto a0 = BaseSymbol::isotropic(2);
  auto p = ZoneParams::defaults(2, 0.02, 0.02, 2, 0.5);
  p.C0 = 20.0;  // shell width 0.4 + h^(1-varsigma)
  CHECK_THROWS_AS(classify(a0, make_shell(a0, 1.0, p), *m, set, p), DecompositionError);
}

TEST_CASE("arc measure") {
  const auto a0 = BaseSymbol::isotropic(2);
  const Vec e1 = make_vec({1, 0});
  // |2 cos phi| < gamma on the unit circle
  for (double g : {0.05, 0.1, 0.2}) {
    const double exact = 4 * std::asin(g / 2);
    const double v = arc_measure(a0, e1, g, 1.0);
    CHECK(std::abs(v - exact) < 1e-10);
    CHECK(v <= 4 * g);
  }
  CHECK(arc_measure(a0, e1, 0.1, 1.0) == doctest::Approx(0.2).epsilon(1e-3));
  double prev = 1e300;
  for (double g = 0.4; g > 1e-4; g /= 2) {
    const double v = arc_measure(a0, e1, g, 1.0);
    CHECK(v < prev);
    prev = v;
  }
  CHECK(arc_measure(a0, make_vec({2, 0}), 0.1, 1.0) ==
        doctest::Approx(arc_measure(a0, e1, 0.1, 1.0) / 2).epsilon(1e-3));
  CHECK(arc_measure(a0, e1, 0.1, -1.0) == 0.0);
  CHECK_THROWS_AS(arc_measure(BaseSymbol::isotropic(1), make_vec({1}), 0.1, 1.0), UnsupportedError);

  // ellipse against a polygonal brute force
  const auto el = BaseSymbol::diagonal({1.0, 4.0});
  const Vec th = make_vec({1, 1});
  const int n = 2000000;
  double brute = 0.0;
  Vec prev_pt = make_vec({1.0, 0.0});
  for (int i = 1; i <= n; ++i) {
    const double t = 2 * kPi * i / n;
    const Vec pt = make_vec({std::cos(t), 0.5 * std::sin(t)});
    const Vec mid = 0.5 * (pt + prev_pt);
    const Vec grad = make_vec({2 * mid[0], 8 * mid[1]});
    if (std::abs(grad.dot(th)) < 0.3) brute += (pt - prev_pt).norm();
    prev_pt = pt;
  }
  CHECK(std::abs(arc_measure(el, th, 0.3, 1.0) - brute) < 1e-5);
}

TEST_CASE("cutoff symbols") {
  const Box r = make_box(make_vec({0.8}), make_vec({1.2}));
  const auto q = build_cutoff(r, 0.1, 0.05, 0.2);
  for (double x : {0.8, 1.0, 1.2}) CHECK(q(make_vec({x})) == 1.0);
  for (double x : {0.7, 1.3, 0.5, 2.0}) CHECK(q(make_vec({x})) == 0.0);
  const double mid = q(make_vec({0.75}));
  CHECK(mid > 0.0);
  CHECK(mid < 1.0);
  CHECK(mid == doctest::Approx(0.5));

  const double h = 0.05, vs = 0.2;
  const double floor = std::pow(h, 1 - vs);
  CHECK_NOTHROW(build_cutoff(r, floor, h, vs));
  CHECK_THROWS_AS(build_cutoff(r, h, h, vs), UncertaintyError);
  CHECK_NOTHROW(build_cutoff(r, h, h, 0.0));

  // |D^a Q| <= C_a ell^-|a| with C_a independent of ell
  auto bounds = [&](double ell) {
    const auto c = build_cutoff(make_box(make_vec({0.0, 0.0}), make_vec({0.1, 0.1})), ell, 1e-6, 0.0);
    std::vector<Vec> xs;
    for (int i = 0; i <= 400; ++i)
      for (int j = 0; j <= 40; ++j) {
        const double a = -ell + (0.1 + 2 * ell) * i / 400.0, b = -ell + (0.1 + 2 * ell) * j / 40.0;
        xs.push_back(make_vec({a, b}));
      }
    return c.scaled_derivative_bounds(xs);
  };
  const auto b1 = bounds(0.1), b2 = bounds(0.01);
  CHECK(b1.first == doctest::Approx(b2.first).epsilon(1e-2));
  CHECK(b1.second == doctest::Approx(b2.second).epsilon(5e-2));
  CHECK(b1.first < 3.0);
  CHECK(b1.second < 20.0);
  // with ell >= h^(1-varsigma) that gives the stated derivative scaling
  const auto qh = build_cutoff(r, floor, h, vs);
  std::vector<Vec> xs;
  for (int i = 0; i <= 2000; ++i) xs.push_back(make_vec({0.8 - floor + (0.4 + 2 * floor) * i / 2000.0}));
  const auto bh = qh.scaled_derivative_bounds(xs);
  CHECK(bh.first / floor <= b1.first * 1.05 * std::pow(h, -(1 - vs)));
}
