#include "apgauge/base_symbol.hpp"

#include "apgauge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace apgauge {

BaseSymbol BaseSymbol::isotropic(int d) {
  if (d < 1 || d > 3) throw ConfigError("base symbol dimension must be 1..3");
  return BaseSymbol(BaseKind::Isotropic, d, std::vector<double>(static_cast<std::size_t>(d), 1.0), 0.0);
}

BaseSymbol BaseSymbol::diagonal(std::vector<double> weights) {
  const int d = static_cast<int>(weights.size());
  if (d < 1 || d > 3) throw ConfigError("base symbol dimension must be 1..3");
  for (double a : weights)
    if (a < 0 || !std::isfinite(a)) throw ConfigError("diagonal base symbol weights must be finite and >= 0");
  return BaseSymbol(BaseKind::Diagonal, d, std::move(weights), 0.0);
}

BaseSymbol BaseSymbol::quartic(int d, double c) {
  if (d < 1 || d > 3) throw ConfigError("base symbol dimension must be 1..3");
  if (!(c > 0)) throw ConfigError("quartic coefficient must be positive");
  return BaseSymbol(BaseKind::Quartic, d, std::vector<double>(static_cast<std::size_t>(d), 1.0), c);
}

std::string BaseSymbol::name() const {
  switch (kind_) {
    case BaseKind::Isotropic: return "isotropic";
    case BaseKind::Diagonal: return "diagonal";
    case BaseKind::Quartic: return "quartic";
  }
  return "?";
}

double BaseSymbol::operator()(const Vec& xi) const {
  double s = 0.0;
  for (int i = 0; i < d_; ++i) s += weights_[static_cast<std::size_t>(i)] * xi[i] * xi[i];
  if (kind_ == BaseKind::Quartic) s += quartic_ * s * s;
  return s;
}

Vec BaseSymbol::gradient(const Vec& xi) const {
  Vec g(d_);
  for (int i = 0; i < d_; ++i) g[i] = 2.0 * weights_[static_cast<std::size_t>(i)] * xi[i];
  if (kind_ == BaseKind::Quartic) g *= 1.0 + 2.0 * quartic_ * xi.squaredNorm();
  return g;
}

Eigen::MatrixXd BaseSymbol::hessian(const Vec& xi) const {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d_, d_);
  for (int i = 0; i < d_; ++i) H(i, i) = 2.0 * weights_[static_cast<std::size_t>(i)];
  if (kind_ == BaseKind::Quartic) {
    const double r2 = xi.squaredNorm();
    H *= 1.0 + 2.0 * quartic_ * r2;
    H += 8.0 * quartic_ * xi * xi.transpose();
  }
  return H;
}

double BaseSymbol::c0() const {
  if (kind_ == BaseKind::Quartic) return quartic_;
  return *std::min_element(weights_.begin(), weights_.end());
}

double BaseSymbol::radius_bound(double lambda) const {
  const double c = c0();
  if (c <= 0) throw NumericalError("base symbol is not elliptic (c0 = 0)");
  const double v = std::max(0.0, (lambda + C0()) / c);
  return std::pow(v, 1.0 / growth_order());
}

double BaseSymbol::ellipticity_slack(const Box& box, int n) const {
  double slack = std::numeric_limits<double>::infinity();
  for (const Vec& p : sample_grid(box, n))
    slack = std::min(slack, (*this)(p) - (c0() * std::pow(p.norm(), growth_order()) - C0()));
  return slack;
}

double BaseSymbol::gradient_check(const std::vector<Vec>& points, double step) const {
  double worst = 0.0;
  for (const Vec& p : points) {
    const Vec g = gradient(p);
    for (int i = 0; i < d_; ++i) {
      Vec a = p, b = p;
      a[i] += step;
      b[i] -= step;
      const double fd = ((*this)(a) - (*this)(b)) / (2 * step);
      const double scale = std::max(1.0, std::abs(g[i]));
      worst = std::max(worst, std::abs(fd - g[i]) / scale);
    }
  }
  return worst;
}

CoefficientFn BaseSymbol::as_coefficient() const {
  BaseSymbol copy = *this;
  return CoefficientFn::real_function([copy](const Vec& xi) { return copy(xi); }, "A0:" + name());
}

}  // namespace apgauge
