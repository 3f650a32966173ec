#include "apgauge/ap_symbol.hpp"

#include "apgauge/errors.hpp"

#include <algorithm>
#include <cmath>

namespace apgauge {

APSymbol::APSymbol(ModulePtr module) : module_(std::move(module)) {
  if (!module_) throw ConfigError("symbol needs a frequency module");
}

APSymbol APSymbol::from_base(const BaseSymbol& a0, ModulePtr module) {
  if (a0.dimension() != module->dimension())
    throw ConfigError("base symbol and frequency module dimensions differ");
  APSymbol s(std::move(module));
  s.add_term(s.module_->zero(), a0.as_coefficient());
  s.hermitian_ = true;
  return s;
}

std::vector<Coords> APSymbol::support() const {
  std::vector<Coords> out;
  out.reserve(terms_.size());
  for (const auto& [c, t] : terms_) out.push_back(c);
  return out;
}

void APSymbol::add_term(const Coords& c, const CoefficientFn& f) {
  if (f.is_zero()) return;
  auto it = terms_.find(c);
  if (it == terms_.end()) {
    terms_.emplace(c, Term{module_->frequency(c), f});
    return;
  }
  it->second.coeff = it->second.coeff + f;
  if (it->second.coeff.is_zero()) terms_.erase(it);
}

CoefficientFn APSymbol::coefficient(const Coords& c) const {
  auto it = terms_.find(c);
  return it == terms_.end() ? CoefficientFn() : it->second.coeff;
}

cplx APSymbol::evaluate(const Vec& x, const Vec& xi) const {
  cplx acc = 0.0;
  EvalContext ctx;
  for (const auto& [c, t] : terms_) {
    const double phase = t.freq.embedding.dot(x);
    acc += t.coeff.evaluate(xi, ctx) * cplx(std::cos(phase), std::sin(phase));
  }
  if (hermitian_) return {acc.real(), 0.0};
  return acc;
}

APSymbol APSymbol::scaled(cplx s) const {
  APSymbol out(module_);
  for (const auto& [c, t] : terms_) out.add_term(c, t.coeff.scaled(s));
  out.hermitian_ = hermitian_ && s.imag() == 0.0;
  return out;
}

APSymbol APSymbol::restricted(const std::function<bool(const Coords&)>& keep) const {
  APSymbol out(module_);
  for (const auto& [c, t] : terms_)
    if (keep(c)) out.terms_.emplace(c, t);
  out.hermitian_ = false;
  return out;
}

APSymbol operator+(const APSymbol& a, const APSymbol& b) {
  if (!a.module_->same_generators(*b.module_)) throw ConfigError("symbols live on different frequency modules");
  APSymbol out(a.module_);
  std::map<Coords, std::vector<CoefficientFn>> acc;
  for (const auto& [c, t] : a.terms_) acc[c].push_back(t.coeff);
  for (const auto& [c, t] : b.terms_) acc[c].push_back(t.coeff);
  for (auto& [c, fs] : acc) out.add_term(c, CoefficientFn::sum(fs));
  out.hermitian_ = a.hermitian_ && b.hermitian_;
  return out;
}

bool APSymbol::same_as(const APSymbol& o) const {
  if (terms_.size() != o.terms_.size() || !module_->same_generators(*o.module_)) return false;
  auto it = o.terms_.begin();
  for (const auto& [c, t] : terms_) {
    if (c != it->first || t.coeff.identity() != it->second.coeff.identity()) return false;
    ++it;
  }
  return true;
}

double APSymbol::hermitian_defect(const Box& box, int samples) const {
  const int d = box.dimension();
  int per_axis = 1;
  while (std::pow(per_axis, d) < samples) ++per_axis;
  const auto pts = sample_grid(box, per_axis);
  double worst = 0.0;
  for (const auto& [c, t] : terms_) {
    const CoefficientFn partner = coefficient(-c);
    for (const Vec& p : pts) {
      EvalContext ctx;
      worst = std::max(worst, std::abs(partner.evaluate(p, ctx) - std::conj(t.coeff.evaluate(p, ctx))));
    }
  }
  return worst;
}

namespace {

void require_same_module(const APSymbol& a, const APSymbol& b) {
  if (!a.module()->same_generators(*b.module()))
    throw ConfigError("weyl_compose: operands use different frequency modules");
}

}  // namespace

// (b e^{i theta x}) # (c e^{i phi x}) = b(xi + h phi/2) c(xi - h theta/2) e^{i (theta+phi) x}
APSymbol weyl_compose(const APSymbol& a, const APSymbol& b, double h) {
  require_same_module(a, b);
  if (!(h > 0)) throw ConfigError("weyl_compose: h must be positive");
  std::map<Coords, std::vector<CoefficientFn>> acc;
  for (const auto& [ca, ta] : a.terms()) {
    const Vec back = -0.5 * h * ta.freq.embedding;
    for (const auto& [cb, tb] : b.terms()) {
      const Vec fwd = 0.5 * h * tb.freq.embedding;
      acc[ca + cb].push_back(ta.coeff.shifted(fwd) * tb.coeff.shifted(back));
    }
  }
  APSymbol out(a.module());
  for (auto& [c, fs] : acc) out.add_term(c, CoefficientFn::sum(fs));
  out.set_hermitian(a.hermitian() && a.same_as(b));
  return out;
}

APSymbol weyl_compose(const BaseSymbol& a, const APSymbol& b, double h) {
  return weyl_compose(APSymbol::from_base(a, b.module()), b, h);
}

APSymbol weyl_compose(const APSymbol& a, const BaseSymbol& b, double h) {
  return weyl_compose(a, APSymbol::from_base(b, a.module()), h);
}

APSymbol commutator_i_over_h(const APSymbol& p, const APSymbol& s, double h) {
  const cplx f(0.0, 1.0 / h);
  APSymbol out = weyl_compose(p, s, h).scaled(f) + weyl_compose(s, p, h).scaled(-f);
  out.set_hermitian(p.hermitian() && s.hermitian());
  return out;
}

APSymbol commutator_i_over_h(const APSymbol& p, const BaseSymbol& s, double h) {
  return commutator_i_over_h(p, APSymbol::from_base(s, p.module()), h);
}

double sup_norm_estimate(const APSymbol& s, const Box& region, int resolution) {
  if (resolution <= 0 || region.dimension() == 0) throw ConfigError("sup_norm_estimate: empty grid");
  for (int i = 0; i < region.dimension(); ++i)
    if (!(region.hi[i] >= region.lo[i])) throw ConfigError("sup_norm_estimate: empty region");
  const auto pts = sample_grid(region, resolution);
  double total = 0.0;
  for (const auto& [c, t] : s.terms()) {
    double m = 0.0;
    for (const Vec& p : pts) {
      EvalContext ctx;
      m = std::max(m, std::abs(t.coeff.evaluate(p, ctx)));
    }
    total += m;
  }
  return total;
}

double sup_norm_on_points(const APSymbol& s, const std::vector<Vec>& points) {
  if (points.empty()) throw ConfigError("sup_norm_on_points: empty point set");
  std::vector<double> m(s.terms().size(), 0.0);
  for (const Vec& p : points) {
    EvalContext ctx;
    std::size_t i = 0;
    for (const auto& [c, t] : s.terms()) m[i] = std::max(m[i], std::abs(t.coeff.evaluate(p, ctx))), ++i;
  }
  double total = 0.0;
  for (double v : m) total += v;
  return total;
}

}  // namespace apgauge
