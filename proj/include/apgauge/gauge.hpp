#pragma once

#include "apgauge/ap_symbol.hpp"
#include "apgauge/zones.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace apgauge {

// Where a chain is valid: the retained subspace V and the xi-points of the
// zone the generator has to be regular on.
struct GaugeTarget {
  int component_id = -1;  // -1: the non-resonant zone
  int level = 0;
  QuasiLatticeSubspace V;  // dim 0 for the non-resonant zone
  std::vector<Vec> points;
  double gamma = 0.0;

  bool in_V(const Coords& c) const;

  static GaugeTarget non_resonant(const ZoneDecomposition& z);
  static GaugeTarget resonant(const ZoneDecomposition& z, int component_id);
  static GaugeTarget custom(int d, std::vector<Vec> points, double gamma,
                            std::optional<QuasiLatticeSubspace> V = std::nullopt);
};

// Generator with (i/h)[P, A0] = B off V:
//   P_theta = i h b_theta / D_theta,  D_theta = A0(xi + theta h/2) - A0(xi - theta h/2),
// on the zone. Elsewhere 1/D_theta is damped by a smooth factor of |D_theta/h|:
// 1 above half the zone's smallest |D_theta/h| (at least guard*gamma), 0
// below a quarter of it.
// Throws SmallDivisorError if some |D_theta/h| < guard * gamma on the target
// points.
APSymbol build_P(const APSymbol& B, const BaseSymbol& a0, const GaugeTarget& target, double h, double guard = 0.5);

struct Conjugation {
  explicit Conjugation(ModulePtr m) : perturbation(std::move(m)) {}
  APSymbol perturbation;  // e^{-i eps P/h} A e^{i eps P/h} - A0
  double remainder = 0.0;  // Ad-series tail plus dropped frequencies
  double tail = 0.0;
  double dropped = 0.0;
  std::vector<double> term_norms;  // sup-norm proxy of each series term
  std::vector<std::string> warnings;

  APSymbol full(const BaseSymbol& a0) const;
};

struct ConjugateOptions {
  // Frequencies to keep; others are dropped into the remainder.
  std::function<bool(const Coords&)> keep;
  // Points for the sup-norm proxies; empty disables the bookkeeping.
  std::vector<Vec> points;
  // Set when (i/h)[eps P, A0] equals this symbol by construction; the
  // first-order term then cancels it exactly instead of numerically.
  const APSymbol* cancels = nullptr;
};

// A = A0 + eps B conjugated by exp(i eps P / h), series truncated at order K:
// sum_{n<K} (-i eps/h)^n / n! Ad^n_P(A).
Conjugation conjugate_expand(const BaseSymbol& a0, const APSymbol& B, const APSymbol& P, double eps, double h, int K,
                             const ConjugateOptions& opt = {});

struct GaugeControls {
  int M = 1;            // target remainder h^(3M)
  int max_steps = 2;
  int ad_order = 0;     // 0: ceil(3M / delta_1), capped
  int ad_cap = 8;
  int sumset_order = 4;
  double guard = 0.5;
  bool stop_at_target = true;
  bool require_target = true;
  std::size_t norm_points = 64;  // points used for sup-norm proxies
};

struct GaugeStep {
  explicit GaugeStep(ModulePtr m) : P(std::move(m)) {}
  APSymbol P;  // generator for the unscaled perturbation
  std::vector<Coords> eliminated;
  double gamma = 0.0;
  double eps_before = 0.0;
  double eps_after = 0.0;  // eps_before^2 / gamma^2
  double remainder_proxy = 0.0;
  double residual = 0.0;  // sup-norm of the off-V part after the step
  int ad_order = 0;
  std::vector<std::string> warnings;
};

struct GaugeChain {
  explicit GaugeChain(ModulePtr m) : perturbation(std::move(m)) {}
  GaugeTarget target;
  double eps = 0.0;
  double h = 0.0;
  std::vector<GaugeStep> steps;
  APSymbol perturbation;  // eps B'': support in V cap Theta'_K
  std::vector<Coords> frequency_set;  // Theta'_K used for truncation
  double final_residual = 0.0;        // off-V part dropped at the end
  double remainder_bound = 0.0;
  double target_bound = 0.0;          // h^(3M)
  bool converged = false;
  std::vector<double> eps_sequence;

  // B'' = perturbation / eps
  APSymbol B_eff() const;
  APSymbol effective(const BaseSymbol& a0) const;
  // Frequency-0 part of A'' as a function of xi.
  CoefficientFn effective_zero(const BaseSymbol& a0) const;
  // Every frequency of A'' lies in V and in Theta'_K, checked on integer
  // coordinates.
  bool support_exact() const;
};

int default_ad_order(const ZoneParams& params, const GaugeControls& ctl);

// Iterated normal form on one zone. Throws ConvergenceError (with the eps_k
// sequence) if the remainder stays above h^(3M) and require_target is set.
GaugeChain eliminate(const BaseSymbol& a0, const APSymbol& B, double eps, double h, const GaugeTarget& target,
                     const ZoneParams& params, const GaugeControls& ctl = {});

}  // namespace apgauge
