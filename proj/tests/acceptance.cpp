#include "apgauge/errors.hpp"
#include "apgauge/freqgeom.hpp"
#include "apgauge/gauge.hpp"
#include "apgauge/lattice.hpp"
#include "apgauge/oracle.hpp"
#include "apgauge/spectra.hpp"
#include "apgauge/zones.hpp"

#include "test_util.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace apgauge;
using testutil::cosine_symbol;
using testutil::fiber_1d;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // <= 0: no runtime limit
  std::function<Outcome()> run;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

APSymbol mathieu_b(const ModulePtr& m) { return cosine_symbol(m, {{Coords{1}, CoefficientFn::constant(1.0)}}); }

Operator mathieu_op() {
  const auto m = FrequencyModule::integer_lattice(1);
  return {BaseSymbol::isotropic(1), mathieu_b(m)};
}

// Chains collected from the gauge-based criteria, checked by criterion 10.
std::vector<std::pair<std::string, GaugeChain>> g_chains;

// ---- 1
Outcome weyl_calculus() {
  const auto m = FrequencyModule::integer_lattice(1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uk(-0.5, 0.5);
  const int G = 16, span = 2, pad = 2 * span;
  const double h = 0.1;
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    const APSymbol s1 = testutil::random_symbol_1d(rng, m, span);
    const APSymbol s2 = testutil::random_symbol_1d(rng, m, span);
    const APSymbol c = weyl_compose(s1, s2, h);
    for (int kk = 0; kk < 5; ++kk) {
      const double k = uk(rng);
      // product on a padded basis, restricted to the G block, is exact
      const Eigen::MatrixXcd prod = fiber_1d(s1, k, G + pad, h) * fiber_1d(s2, k, G + pad, h);
      const Eigen::MatrixXcd direct = fiber_1d(c, k, G, h);
      const Eigen::MatrixXcd block = prod.block(pad, pad, 2 * G + 1, 2 * G + 1);
      worst = std::max(worst, (block - direct).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-10, "max entry gap " + fmt(worst) + " (tol 1e-10, 20 pairs x 5 k, G = 16)"};
}

// ---- 2
Outcome generator_identity() {
  const auto m = FrequencyModule::integer_lattice(1);
  const auto a0 = BaseSymbol::isotropic(1);
  const double h = 0.1;
  std::vector<Vec> pts;
  for (int i = 0; i < 64; ++i) pts.push_back(make_vec({0.5 + 1.5 * i / 63.0}));
  const APSymbol B = mathieu_b(m);
  const APSymbol P = build_P(B, a0, GaugeTarget::custom(1, pts, 0.3), h);
  const APSymbol lhs = commutator_i_over_h(P, a0, h);
  double gap = 0.0, pgap = 0.0;
  for (const Vec& xi : pts) {
    for (const auto& [c, term] : B.terms()) gap = std::max(gap, std::abs(lhs.coefficient(c)(xi) - term.coeff(xi)));
    for (const auto& [c, term] : lhs.terms())
      if (!B.terms().count(c)) gap = std::max(gap, std::abs(term.coeff(xi)));
    // P_theta = i h / (A0(xi + theta h/2) - A0(xi - theta h/2)) = i / (2 theta xi)
    pgap = std::max(pgap, std::abs(P.coefficient(Coords{1})(xi) - cplx(0.0, 1.0 / (2 * xi[0]))));
  }
  return {gap <= 1e-12 && pgap <= 1e-12,
          "coefficient gap " + fmt(gap) + ", generator gap " + fmt(pgap) + " at 64 xi (tol 1e-12)"};
}

// ---- 3
Outcome free_case() {
  const Operator op = mathieu_op();
  const double want = 10.0 / std::numbers::pi;
  const IdsResult p = ids_pipeline(op, 0.0, 0.1, 1.0);
  const double o = ids_oracle(op, 1.0, 0.1, 0.0, 400);
  const double ep = std::abs(p.value - want), eo = std::abs(o - want);
  return {ep <= 1e-8 && eo <= 1e-4,
          "pipeline err " + fmt(ep) + " (tol 1e-8), oracle err " + fmt(eo) + " (tol 1e-4, 400 k)"};
}

// ---- 4
Outcome spectral_preservation() {
  const double eps = 0.1, h = 0.1;
  const auto m = FrequencyModule::integer_lattice(1);
  const auto a0 = BaseSymbol::isotropic(1);
  const ZoneParams p = ZoneParams::defaults(1, eps, h, 2, 2.0);
  const auto z = classify(a0, make_shell(a0, 1.0, p), *m, sumset(*m, 4), p);
  const APSymbol B = mathieu_b(m);
  const GaugeChain chain = eliminate(a0, B, eps, h, GaugeTarget::non_resonant(z), p);
  g_chains.emplace_back("criterion 4", chain);
  if (chain.steps.empty()) return {false, "no gauge step taken"};
  const APSymbol A = APSymbol::from_base(a0, m) + B.scaled(eps);
  const int G = 40;

  double conj_gap = 0.0, unit_gap = 0.0;
  for (double k : {0.0, 0.25, 0.5}) {
    const Eigen::MatrixXcd MA = fiber_1d(A, k, G, h);
    Eigen::MatrixXcd U = Eigen::MatrixXcd::Identity(MA.rows(), MA.cols());
    for (const auto& s : chain.steps) {
      const Eigen::MatrixXcd MP = fiber_1d(s.P.scaled(s.eps_before), k, G, h);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ps(0.5 * (MP + MP.adjoint()));
      const Eigen::VectorXcd ph = (ps.eigenvalues().cast<cplx>() * cplx(0.0, 1.0 / h)).array().exp();
      U = U * ps.eigenvectors() * ph.asDiagonal() * ps.eigenvectors().adjoint();
    }
    unit_gap = std::max(unit_gap, (U.adjoint() * U - Eigen::MatrixXcd::Identity(U.rows(), U.cols())).norm());
    const Eigen::MatrixXcd conj = U.adjoint() * MA * U;
    const Eigen::VectorXd before = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(MA).eigenvalues();
    const Eigen::VectorXd after =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(0.5 * (conj + conj.adjoint())).eigenvalues();
    conj_gap = std::max(conj_gap, (before - after).cwiseAbs().maxCoeff());
  }

  // diagonal A'' against Bloch eigenvalues of A on the zone
  const auto z0 = chain.effective_zero(a0);
  double worst_ratio = 0.0;
  int compared = 0;
  for (double k : {0.1, 0.3, 0.5, 0.7}) {
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(fiber_1d(A, k, G, h)).eigenvalues();
    for (int n = -G; n <= G; ++n) {
      const double xi = h * (k + n);
      if (xi < 0.85 || xi > 1.15) continue;
      const double want = z0(make_vec({xi})).real();
      double best = 1e300;
      for (Eigen::Index i = 0; i < ev.size(); ++i) best = std::min(best, std::abs(ev[i] - want));
      worst_ratio = std::max(worst_ratio, best / chain.remainder_bound);
      ++compared;
    }
  }
  const bool ok = conj_gap <= 1e-8 && unit_gap <= 1e-10 && compared >= 10 && worst_ratio <= 10.0;
  return {ok, "conjugated eigenvalue gap " + fmt(conj_gap) + " (tol 1e-8), unitarity " + fmt(unit_gap) +
                  "; A'' vs Bloch: worst gap / remainder " + fmt(worst_ratio) + " (tol 10) over " +
                  std::to_string(compared) + " levels, remainder " + fmt(chain.remainder_bound)};
}

// ---- 5
const std::vector<double> kHs{0.2, 0.1, 0.05, 0.025};

Outcome order_improvement() {
  const Operator op = mathieu_op();
  const SpectralTable t = convergence_study(op, 1.0, kHs, EpsLaw{1.0, 1.0}, {1, 2});
  double s1 = NAN, s2 = NAN, rel = NAN;
  for (const auto& s : t.slopes) (s.K == 1 ? s1 : s2) = s.slope;
  for (const auto& r : t.rows)
    if (r.K == 2 && r.h == 0.025) rel = r.abs_err / r.n_oracle;
  std::ostringstream os;
  os << "slope K=1 " << fmt(s1) << ", K=2 " << fmt(s2) << ", increment " << fmt(s2 - s1)
     << " (min 0.5); K=2 rel err at h=0.025 " << fmt(rel) << " (max 0.005); errors";
  for (const auto& r : t.rows) os << " " << fmt(r.abs_err);
  return {s2 - s1 >= 0.5 && rel <= 0.005, os.str()};
}

// ---- 6
Outcome remainder_scaling() {
  const Operator op = mathieu_op();
  const double h = 0.05;
  const std::vector<double> es{0.0125, 0.025, 0.05};
  PipelineControls ctl;
  ctl.K = 0;
  std::vector<double> pointwise, ids_err;
  for (double e : es) {
    const double pipe = spectral_function_leading(0.0, 1.0, op, e, h, ctl);
    const double orc = spectral_function_oracle(make_vec({0.0}), 1.0, op, h, e, 200);
    pointwise.push_back(std::abs(pipe - orc));
    ids_err.push_back(std::abs(ids_pipeline(op, e, h, 1.0, ctl).value - ids_oracle(op, 1.0, h, e, 200)));
  }
  const double slope = loglog_slope(es, pointwise), ids_slope = loglog_slope(es, ids_err);
  return {std::abs(slope - 1.0) <= 0.3,
          "K=0 spectral function error at x=0: " + fmt(pointwise[0]) + " " + fmt(pointwise[1]) + " " +
              fmt(pointwise[2]) + ", slope " + fmt(slope) + " (1 +- 0.3); IDS error slope " + fmt(ids_slope) +
              " (mean of B vanishes)"};
}

// ---- 7
Outcome non_propagation() {
  const Operator op = mathieu_op();
  const double h = 0.05, eps = 0.01;
  const CutoffSymbol c1(make_box(make_vec({0.8}), make_vec({1.2})), 0.1);
  const CutoffSymbol c2(make_box(make_vec({1.6}), make_vec({2.0})), 0.1);
  const XiFunction q1 = [&](const Vec& xi) { return c1(xi); };
  const XiFunction q2 = [&](const Vec& xi) { return c2(xi); };
  const double dist = c2.region().lo[0] - c1.region().hi[0];
  const double sep = propagation_norm(op, q1, q2, 1.0, h, eps, 8);
  const double same = propagation_norm(op, q1, q1, 1.0, h, eps, 8);
  const double late = propagation_norm(op, q1, q2, 100.0 / eps, h, eps, 8);
  return {dist >= 0.4 - 1e-12 && sep <= 1e-6 && same >= 0.1,
          "distance " + fmt(dist) + ": separated " + fmt(sep) + " (max 1e-6), overlapping " + fmt(same) +
              " (min 0.1); separated pair at T = 100/eps " + fmt(late) + " (recorded)"};
}

// ---- 8
Outcome zone_geometry() {
  const auto a0 = BaseSymbol::isotropic(2);
  const Vec th = make_vec({1.0, 0.0});
  std::ostringstream os;
  bool ok = true;
  double worst_exact = 0.0;
  for (double g : {0.05, 0.1, 0.2}) {
    const double v = arc_measure(a0, th, g, 1.0), half = arc_measure(a0, th, g / 2, 1.0);
    const double ratio = v / half;
    // |<2 xi, e1>| < g on the unit circle: 4 arcsin(g/2)
    worst_exact = std::max(worst_exact, std::abs(v - 4 * std::asin(g / 2)));
    ok = ok && v <= 4 * g && std::abs(ratio - 2.0) <= 0.4;
    os << "gamma " << g << ": " << fmt(v) << " (max " << fmt(4 * g) << "), halving ratio " << fmt(ratio) << "; ";
  }
  ok = ok && worst_exact <= 1e-8;
  os << "closed form gap " << fmt(worst_exact);
  return {ok, os.str()};
}

// ---- 9
Outcome condition_checkers() {
  std::ostringstream os;
  const auto z2 = FrequencyModule::integer_lattice(2);
  const bool lattice_ok = check_conditions(*z2, 2, 10.0, 2).all_pass();

  Eigen::MatrixXd G(2, 2);
  G << 1.0, 0.0, 0.0, 1e-6;
  const auto np = std::make_shared<FrequencyModule>(G, std::vector<Coords>{{1, 0}, {1, 1}});
  const ConditionReport np_rep = check_conditions(*np, 1, 10.0, 1);
  const auto& C = np_rep.get("C");
  const std::set<Coords> wit(C.witness.begin(), C.witness.end());
  const bool c_fail = C.status == ConditionStatus::Fail && wit == std::set<Coords>{{1, 0}, {1, 1}};

  Eigen::MatrixXd Gg(1, 2);
  Gg << 1.0, (1.0 + std::sqrt(5.0)) / 2.0;
  const std::vector<Coords> gf{{1, 0}, {0, 1}};
  const auto golden = std::make_shared<FrequencyModule>(Gg, gf);
  const ConditionReport g_rep = check_conditions(*golden, 2, 10.0, 1);
  const auto& A = g_rep.get("A");
  const bool a_pass = A.status == ConditionStatus::Pass && integer_kernel(gf).empty();

  os << "Z^2 all pass " << (lattice_ok ? "yes" : "no") << "; near-parallel C " << status_name(C.status)
     << " witness";
  for (const auto& c : C.witness) os << " (" << c[0] << "," << c[1] << ")";
  os << " angle " << fmt(C.value) << "; golden A " << status_name(A.status) << ", integer kernel "
     << (integer_kernel(gf).empty() ? "empty" : "nonempty");
  return {lattice_ok && c_fail && a_pass, os.str()};
}

// ---- 10
// c lies in the rational span of the integer basis of V and in the stored sumset.
bool in_V_exact(const GaugeChain& ch, const Coords& c) {
  const auto& basis = ch.target.V.basis;
  if (basis.empty()) return std::all_of(c.begin(), c.end(), [](long long v) { return v == 0; });
  return in_rational_span(basis, c);
}

Outcome support_exactness() {
  const Operator op = mathieu_op();
  for (double h : kHs)
    for (int K : {1, 2}) {
      PipelineControls ctl;
      ctl.K = K;
      for (auto& zc : pipeline_chains(op, h, h, 1.0, pipeline_params(op, h, h, K), ctl))
        g_chains.emplace_back("mathieu h=" + fmt(h) + " K=" + std::to_string(K) + " " + zc.zone, zc.chain);
    }
  // d = 2 lattice with level-1 resonant components on the level set
  const auto m2 = FrequencyModule::integer_lattice(2);
  const Operator op2{BaseSymbol::isotropic(2), cosine_symbol(m2, {{Coords{1, 0}, CoefficientFn::constant(1.0)},
                                                                  {Coords{0, 1}, CoefficientFn::constant(1.0)}})};
  PipelineControls ctl2;
  ctl2.K = 1;
  ctl2.gauge.sumset_order = ctl2.resonant_gauge.sumset_order = 1;
  for (auto& zc : pipeline_chains(op2, 0.01, 0.1, 1.0, pipeline_params(op2, 0.01, 0.1, 1), ctl2))
    g_chains.emplace_back("lattice2d " + zc.zone, zc.chain);

  std::size_t freqs = 0, bad = 0, resonant = 0;
  std::string first_bad;
  for (const auto& [name, ch] : g_chains) {
    if (ch.target.V.dim() > 0) ++resonant;
    for (const auto& c : ch.perturbation.support()) {
      ++freqs;
      const bool in_set = std::find(ch.frequency_set.begin(), ch.frequency_set.end(), c) != ch.frequency_set.end();
      if (!in_set || !in_V_exact(ch, c) || !ch.support_exact()) {
        if (bad++ == 0) first_bad = name;
      }
    }
  }
  std::string d = std::to_string(g_chains.size()) + " chains (" + std::to_string(resonant) + " resonant), " +
                  std::to_string(freqs) + " retained frequencies, " + std::to_string(bad) + " outside V cap Theta'_K";
  if (bad) d += " (first: " + first_bad + ")";
  return {bad == 0 && resonant > 0, d};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "exact Weyl calculus", 10, weyl_calculus},
      {2, "generator identity", 1, generator_identity},
      {3, "free-case exactness", 30, free_case},
      {4, "gauge spectral preservation", 60, spectral_preservation},
      {5, "order improvement", 600, order_improvement},
      {6, "remainder scaling", 300, remainder_scaling},
      {7, "non-propagation", 120, non_propagation},
      {8, "zone geometry", 60, zone_geometry},
      {9, "condition checkers", 60, condition_checkers},
      {10, "support exactness", 0, support_exactness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s <= 0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s %2d %s: %s [%.2f s", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
    if (c.budget_s > 0) std::printf(" / %.0f s%s", c.budget_s, in_time ? "" : " exceeded");
    std::printf("]\n");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
