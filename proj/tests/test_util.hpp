#pragma once

#include "apgauge/ap_symbol.hpp"

#include <random>

namespace testutil {

using namespace apgauge;

// Direct plane-wave matrix of a d=1 symbol on Z: basis gamma in [-G, G],
// entry (g, g') = b_{g-g'}(h (k + (g+g')/2)).
inline Eigen::MatrixXcd fiber_1d(const APSymbol& s, double k, int G, double h) {
  const int n = 2 * G + 1;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const long long diff = a - b;
      const CoefficientFn f = s.coefficient(Coords{diff});
      if (f.is_zero()) continue;
      const double gmid = 0.5 * ((a - G) + (b - G));
      M(a, b) = f(make_vec({h * (k + gmid)}));
    }
  return M;
}

inline CoefficientFn random_coefficient(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> kind(0, 3);
  const cplx c(u(rng), u(rng));
  switch (kind(rng)) {
    case 0: return CoefficientFn::constant(c);
    case 1: return CoefficientFn::polynomial({{c, {0}}, {cplx(u(rng), u(rng)), {1}}, {cplx(u(rng), 0.0), {2}}});
    case 2: return CoefficientFn::gaussian(0.5 + 0.5 * (u(rng) + 1.0), c);
    default: return CoefficientFn::reciprocal_power(1.0 + (u(rng) + 1.0), c);
  }
}

// Random trig polynomial with frequencies in [-span, span].
inline APSymbol random_symbol_1d(std::mt19937_64& rng, ModulePtr mod, int span) {
  APSymbol s(mod);
  std::bernoulli_distribution keep(0.7);
  for (long long t = -span; t <= span; ++t)
    if (keep(rng)) s.add_term(Coords{t}, random_coefficient(rng));
  if (s.empty()) s.add_term(Coords{0}, random_coefficient(rng));
  return s;
}

// sum_{+-theta} b (e^{i theta x} + e^{-i theta x}) for real b.
inline APSymbol cosine_symbol(ModulePtr mod, const std::vector<std::pair<Coords, CoefficientFn>>& terms) {
  APSymbol s(mod);
  for (const auto& [c, f] : terms) {
    s.add_term(c, f);
    s.add_term(-c, f.conjugated());
  }
  s.set_hermitian(true);
  return s;
}

}  // namespace testutil
