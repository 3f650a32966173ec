#pragma once

#include "apgauge/coefficient.hpp"
#include "apgauge/types.hpp"

#include <string>
#include <vector>

namespace apgauge {

enum class BaseKind { Isotropic, Diagonal, Quartic };

// The unperturbed symbol A0(xi). Closed forms only, so gradient and Hessian
// are analytic.
class BaseSymbol {
 public:
  // |xi|^2
  static BaseSymbol isotropic(int d);
  // sum_i a_i xi_i^2
  static BaseSymbol diagonal(std::vector<double> weights);
  // |xi|^2 + c |xi|^4
  static BaseSymbol quartic(int d, double c);

  int dimension() const { return d_; }
  BaseKind kind() const { return kind_; }
  const std::vector<double>& weights() const { return weights_; }
  double quartic_coefficient() const { return quartic_; }
  std::string name() const;

  double operator()(const Vec& xi) const;
  Vec gradient(const Vec& xi) const;
  Eigen::MatrixXd hessian(const Vec& xi) const;

  int growth_order() const { return kind_ == BaseKind::Quartic ? 4 : 2; }
  // A0 >= c0 |xi|^m - C0
  double c0() const;
  double C0() const { return 0.0; }
  double infimum() const { return 0.0; }

  // Largest |xi| with A0(xi) <= lambda, from the ellipticity bound.
  double radius_bound(double lambda) const;

  // Minimum over the grid of A0 - (c0|xi|^m - C0). Nonnegative means the
  // ellipticity bound holds on the samples.
  double ellipticity_slack(const Box& box, int n) const;
  // Max relative deviation of the analytic gradient from central differences.
  double gradient_check(const std::vector<Vec>& points, double step = 1e-5) const;

  CoefficientFn as_coefficient() const;

 private:
  BaseSymbol(BaseKind k, int d, std::vector<double> w, double q)
      : kind_(k), d_(d), weights_(std::move(w)), quartic_(q) {}

  BaseKind kind_;
  int d_;
  std::vector<double> weights_;
  double quartic_;
};

}  // namespace apgauge
