#include "apgauge/gauge.hpp"

#include "apgauge/errors.hpp"
#include "apgauge/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace apgauge {

namespace {

QuasiLatticeSubspace zero_subspace(int d) {
  QuasiLatticeSubspace V;
  V.Q = Eigen::MatrixXd(d, 0);
  return V;
}

std::vector<Vec> subsample(const std::vector<Vec>& pts, std::size_t cap) {
  if (cap == 0 || pts.size() <= cap) return pts;
  std::vector<Vec> out;
  const double stride = static_cast<double>(pts.size()) / static_cast<double>(cap);
  for (std::size_t i = 0; i < cap; ++i) out.push_back(pts[static_cast<std::size_t>(i * stride)]);
  return out;
}

double proxy(const APSymbol& s, const std::vector<Vec>& pts) {
  if (pts.empty() || s.empty()) return 0.0;
  return sup_norm_on_points(s, pts);
}

APSymbol keep_if(const APSymbol& s, const std::function<bool(const Coords&)>& keep) {
  APSymbol out = s.restricted(keep);
  out.set_hermitian(s.hermitian());  // every predicate used here is symmetric
  return out;
}

std::string vec_string(const Vec& v) {
  std::ostringstream os;
  os << "(";
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ")";
  return os.str();
}

}  // namespace

bool GaugeTarget::in_V(const Coords& c) const {
  if (is_zero(c)) return true;
  if (V.dim() == 0) return false;
  if (V.dim() == V.ambient()) return true;
  return in_rational_span(V.basis, c);
}

GaugeTarget GaugeTarget::non_resonant(const ZoneDecomposition& z) {
  GaugeTarget t;
  t.V = zero_subspace(z.shell.dimension());
  for (std::size_t pos : z.nonresonant_cells()) t.points.push_back(z.shell.center(z.shell.cells[pos]));
  t.gamma = z.params.gamma(1);
  return t;
}

GaugeTarget GaugeTarget::resonant(const ZoneDecomposition& z, int component_id) {
  if (component_id < 0 || component_id >= static_cast<int>(z.components.size()))
    throw ConfigError("no zone component " + std::to_string(component_id));
  const auto& comp = z.components[static_cast<std::size_t>(component_id)];
  GaugeTarget t;
  t.component_id = component_id;
  t.level = comp.level;
  t.V = comp.V;
  for (std::size_t pos : comp.cells) t.points.push_back(z.shell.center(z.shell.cells[pos]));
  t.gamma = z.params.gamma(comp.level);
  return t;
}

GaugeTarget GaugeTarget::custom(int d, std::vector<Vec> points, double gamma, std::optional<QuasiLatticeSubspace> V) {
  GaugeTarget t;
  t.V = V ? *V : zero_subspace(d);
  t.level = t.V.dim();
  t.points = std::move(points);
  t.gamma = gamma;
  return t;
}

APSymbol build_P(const APSymbol& B, const BaseSymbol& a0, const GaugeTarget& target, double h, double guard) {
  if (!(h > 0)) throw ConfigError("build_P: h must be positive");
  APSymbol P(B.module());
  const CoefficientFn A = a0.as_coefficient();
  const double floor = guard * target.gamma;
  for (const auto& [c, term] : B.terms()) {
    if (target.in_V(c)) continue;
    const Vec half = term.freq.embedding * (h / 2);
    const CoefficientFn D = A.shifted(half) - A.shifted(-half);
    double lo = std::numeric_limits<double>::infinity();
    for (const Vec& xi : target.points) {
      const double v = std::abs(D(xi)) / h;
      lo = std::min(lo, v);
      if (v < floor) {
        std::ostringstream os;
        os << "small divisor: theta = " << coords_string(c) << " at xi = " << vec_string(xi) << ", |D/h| = " << v
           << " < " << floor;
        throw SmallDivisorError(os.str());
      }
    }
    // chi(|D/h|) / D, chi = 1 from half the zone's smallest |D/h| up and 0
    // below a quarter of it: exact on the zone and a margin around it,
    // bounded and slowly varying where composition shifts land.
    const double top = std::max(std::isfinite(lo) ? lo / 2 : floor, floor);
    const auto inv = CoefficientFn::real_function(
        [a0, half, h, top](const Vec& xi) {
          const double d = a0(xi + half) - a0(xi - half);
          const double chi = smooth_step((std::abs(d) / h - top / 2) / (top / 2));
          return chi == 0.0 ? 0.0 : chi / d;
        },
        "chi/D[" + coords_string(c) + "]");
    P.add_term(c, CoefficientFn::constant(cplx(0.0, h)) * term.coeff * inv);
  }
  P.set_hermitian(B.hermitian());
  return P;
}

APSymbol Conjugation::full(const BaseSymbol& a0) const {
  return APSymbol::from_base(a0, perturbation.module()) + perturbation;
}

Conjugation conjugate_expand(const BaseSymbol& a0, const APSymbol& B, const APSymbol& P, double eps, double h, int K,
                             const ConjugateOptions& opt) {
  if (K < 1) throw ConfigError("conjugate_expand: order must be >= 1");
  const ModulePtr mod = B.module();
  Conjugation out(mod);
  const APSymbol S = B.scaled(eps);
  const APSymbol G = P.scaled(eps);
  auto keep = opt.keep ? opt.keep : [](const Coords&) { return true; };
  const auto& pts = opt.points;

  auto truncate = [&](const APSymbol& x) {
    APSymbol kept = keep_if(x, keep);
    if (kept.terms().size() != x.terms().size())
      out.dropped += proxy(keep_if(x, [&](const Coords& c) { return !keep(c); }), pts);
    return kept;
  };

  if (G.empty()) {
    out.perturbation = truncate(S);
    return out;
  }

  // C_n = (-i/h)^n / n! Ad^n_G(A); with `cancels` the A0 part of C_1 is
  // -cancels, which removes those frequencies from S outright.
  APSymbol pert = S;
  APSymbol C(mod);
  APSymbol first(mod);
  if (opt.cancels) {
    const auto& off = *opt.cancels;
    pert = keep_if(S, [&](const Coords& c) { return off.coefficient(c).is_zero(); });
    first = commutator_i_over_h(G, S, h).scaled(-1.0);
    C = off.scaled(-1.0) + first;
  } else {
    const APSymbol A = APSymbol::from_base(a0, mod) + S;
    C = commutator_i_over_h(G, A, h).scaled(-1.0);
    first = C;
  }
  pert = truncate(pert);
  out.term_norms.push_back(proxy(S, pts));
  for (int n = 1; n <= K; ++n) {
    if (n > 1) C = commutator_i_over_h(G, C, h).scaled(-1.0 / n);
    const double nrm = proxy(C, pts);
    if (n == K) {
      out.tail = K * nrm;  // (-i eps/h)^K Ad^K / (K-1)!
      break;
    }
    if (!pts.empty() && eps != 0 && out.term_norms.back() > 0 && nrm > out.term_norms.back() / std::abs(eps))
      out.warnings.push_back("term " + std::to_string(n) + " grows faster than 1/eps: series may diverge");
    out.term_norms.push_back(nrm);
    C = truncate(C);
    pert = pert + (n == 1 ? truncate(first) : C);
  }
  out.perturbation = pert;
  out.remainder = out.tail + out.dropped;
  return out;
}

APSymbol GaugeChain::B_eff() const { return eps == 0 ? perturbation : perturbation.scaled(1.0 / eps); }

APSymbol GaugeChain::effective(const BaseSymbol& a0) const {
  return APSymbol::from_base(a0, perturbation.module()) + perturbation;
}

CoefficientFn GaugeChain::effective_zero(const BaseSymbol& a0) const {
  const CoefficientFn b0 = perturbation.coefficient(perturbation.module()->zero());
  return b0.is_zero() ? a0.as_coefficient() : a0.as_coefficient() + b0;
}

bool GaugeChain::support_exact() const {
  for (const auto& c : perturbation.support()) {
    if (!target.in_V(c)) return false;
    if (!std::binary_search(frequency_set.begin(), frequency_set.end(), c)) return false;
  }
  return true;
}

int default_ad_order(const ZoneParams& params, const GaugeControls& ctl) {
  if (ctl.ad_order > 0) return ctl.ad_order;
  const int k = static_cast<int>(std::ceil(3.0 * ctl.M / params.delta.at(0) - 1e-9));
  return std::clamp(k, 2, ctl.ad_cap);
}

GaugeChain eliminate(const BaseSymbol& a0, const APSymbol& B, double eps, double h, const GaugeTarget& target,
                     const ZoneParams& params, const GaugeControls& ctl) {
  if (!(h > 0)) throw ConfigError("eliminate: h must be positive");
  if (ctl.max_steps < 0) throw ConfigError("eliminate: max_steps must be >= 0");
  const ModulePtr mod = B.module();
  GaugeChain chain(mod);
  chain.target = target;
  chain.eps = eps;
  chain.h = h;
  chain.target_bound = std::pow(h, 3.0 * ctl.M);
  const SumsetK set = sumset(*mod, std::max(ctl.sumset_order, 1));
  chain.frequency_set = set.elements;
  const auto keep = [&set](const Coords& c) { return set.contains(c); };
  const auto off_V = [&target](const Coords& c) { return !target.in_V(c); };
  const auto pts = subsample(target.points, ctl.norm_points);
  const int K = default_ad_order(params, ctl);

  double acc = 0.0;
  APSymbol S = keep_if(B.scaled(eps), keep);
  if (eps == 0) S = APSymbol(mod);
  chain.eps_sequence.push_back(eps);
  double eps_k = std::abs(eps);
  for (int step = 0;; ++step) {
    const APSymbol off = keep_if(S, off_V);
    if (off.empty()) break;
    if (ctl.stop_at_target && acc + proxy(off, pts) <= chain.target_bound) break;
    if (step == ctl.max_steps) break;

    GaugeStep rec(mod);
    const APSymbol G = build_P(off, a0, target, h, ctl.guard);
    ConjugateOptions opt;
    opt.keep = keep;
    opt.points = pts;
    opt.cancels = &off;
    Conjugation conj = conjugate_expand(a0, S, G, 1.0, h, K, opt);
    rec.P = G.scaled(1.0 / eps);
    rec.eliminated = off.support();
    rec.gamma = target.gamma;
    rec.eps_before = eps_k;
    eps_k = eps_k * eps_k / (target.gamma * target.gamma);
    rec.eps_after = eps_k;
    rec.ad_order = K;
    rec.remainder_proxy = conj.remainder;
    rec.warnings = conj.warnings;
    S = conj.perturbation;
    rec.residual = proxy(keep_if(S, off_V), pts);
    acc += conj.remainder;
    chain.eps_sequence.push_back(eps_k);
    chain.steps.push_back(std::move(rec));
  }
  chain.final_residual = proxy(keep_if(S, off_V), pts);
  chain.remainder_bound = acc + chain.final_residual;
  chain.converged = chain.remainder_bound <= chain.target_bound;
  chain.perturbation = keep_if(S, [&target](const Coords& c) { return target.in_V(c); });
  if (!chain.converged && ctl.require_target) {
    std::ostringstream os;
    os << "zone " << target.component_id << ": remainder proxy " << chain.remainder_bound << " above h^(3M) = "
       << chain.target_bound << " after " << chain.steps.size() << " steps; eps_k =";
    for (double e : chain.eps_sequence) os << " " << e;
    throw ConvergenceError(os.str());
  }
  return chain;
}

}  // namespace apgauge
