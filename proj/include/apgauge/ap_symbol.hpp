#pragma once

#include "apgauge/base_symbol.hpp"
#include "apgauge/coefficient.hpp"
#include "apgauge/frequency.hpp"

#include <functional>
#include <map>
#include <vector>

namespace apgauge {

// B(x, xi) = sum_theta b_theta(xi) exp(i <theta, x>), finite support.
class APSymbol {
 public:
  struct Term {
    Frequency freq;
    CoefficientFn coeff;
  };

  explicit APSymbol(ModulePtr module);
  // Frequency-0 symbol carrying A0.
  static APSymbol from_base(const BaseSymbol& a0, ModulePtr module);

  const ModulePtr& module() const { return module_; }
  int dimension() const { return module_->dimension(); }
  const std::map<Coords, Term>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  std::vector<Coords> support() const;
  bool hermitian() const { return hermitian_; }
  void set_hermitian(bool h) { hermitian_ = h; }

  // Adds to whatever is already stored at the frequency.
  void add_term(const Coords& c, const CoefficientFn& f);
  CoefficientFn coefficient(const Coords& c) const;

  cplx evaluate(const Vec& x, const Vec& xi) const;

  APSymbol scaled(cplx s) const;
  APSymbol restricted(const std::function<bool(const Coords&)>& keep) const;
  friend APSymbol operator+(const APSymbol& a, const APSymbol& b);

  // True when both values share every coefficient handle.
  bool same_as(const APSymbol& o) const;

  // Checks b_{-theta}(xi) = conj(b_theta(xi)) at `samples` points spread over
  // the box; returns the worst absolute deviation.
  double hermitian_defect(const Box& box, int samples) const;

 private:
  ModulePtr module_;
  std::map<Coords, Term> terms_;
  bool hermitian_ = false;
};

// Exact Weyl symbol of the operator product.
APSymbol weyl_compose(const APSymbol& a, const APSymbol& b, double h);
APSymbol weyl_compose(const BaseSymbol& a, const APSymbol& b, double h);
APSymbol weyl_compose(const APSymbol& a, const BaseSymbol& b, double h);

// (i/h)(P#S - S#P)
APSymbol commutator_i_over_h(const APSymbol& p, const APSymbol& s, double h);
APSymbol commutator_i_over_h(const APSymbol& p, const BaseSymbol& s, double h);

// Sum over frequencies of the grid maximum of |b_theta| on the region.
double sup_norm_estimate(const APSymbol& s, const Box& region, int resolution);
// Same proxy over an explicit point set (regions that are unions of cells).
double sup_norm_on_points(const APSymbol& s, const std::vector<Vec>& points);

}  // namespace apgauge
