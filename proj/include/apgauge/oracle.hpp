#pragma once

#include "apgauge/operator.hpp"

#include <functional>
#include <vector>

namespace apgauge {

using XiFunction = std::function<double(const Vec&)>;

struct FiberProblem {
  Vec k;                      // quasimomentum, coordinates in [-1/2, 1/2)^d
  double radius = 0.0;        // basis cutoff |G n| <= radius
  std::vector<Coords> basis;  // n in Z^d
  Eigen::MatrixXcd M;
};

struct OracleControls {
  int k_points = 200;        // per dimension
  double radius = 0.0;       // 0: automatic
  double margin = 1.0;       // energy margin above tau + eps sup|B| for the cutoff
  int doubling_checks = 3;   // k samples compared against a doubled basis
  bool refine_1d = true;     // locate count jumps in k by bisection (d = 1)
  double jump_tol = 1e-13;
  int panels_1d = 64;        // Gauss-Legendre panels for the 1-d spectral function
  int threads = 0;
};

// Plane-wave Bloch-Floquet solver for a periodic operator: the frequency
// module must be a lattice G Z^d with G square and invertible.
class BlochOracle {
 public:
  BlochOracle(Operator op, double h, double eps, double tau_max, OracleControls ctl = {});

  const Operator& op() const { return op_; }
  double h() const { return h_; }
  double eps() const { return eps_; }
  double radius() const { return radius_; }
  std::size_t basis_size() const { return basis_.size(); }
  // |det G| / (2 pi)^d
  double normalization() const { return norm_; }
  // Momentum xi = h G (k + n).
  Vec momentum(const Vec& k, const Coords& n) const;

  FiberProblem fiber(const Vec& k) const;
  std::vector<double> eigenvalues(const Vec& k) const;
  int count(const Vec& k, double tau) const;

  double ids(double tau) const;
  // tau-grid in one sweep (shares eigen-decompositions)
  std::vector<double> ids(const std::vector<double>& taus) const;
  // (x, x) kernel of the spectral projector, one value per x
  std::vector<double> spectral_function(const std::vector<Vec>& xs, double tau) const;
  // trace of Q E(tau) Q per unit volume, Q = multiplication by window(xi)
  double windowed_ids(double tau, const XiFunction& window) const;
  // max over k samples and t in {T/4, T/2, T} of ||Q2 exp(i t M / h) Q1||
  double propagation_norm(const XiFunction& q1, const XiFunction& q2, double T, int k_samples) const;

 private:
  Eigen::MatrixXcd build(const Vec& k, const std::vector<Coords>& basis) const;
  std::vector<Coords> make_basis(double radius) const;
  std::vector<Vec> k_grid(int n) const;
  // 1-d: breakpoints in [-1/2, 1/2] where count(k, tau) jumps
  std::vector<double> jumps_1d(double tau) const;

  Operator op_;
  double h_, eps_, tau_max_;
  OracleControls ctl_;
  Eigen::MatrixXd G_;
  double norm_ = 0.0;
  double sup_b_ = 0.0;
  double radius_ = 0.0;
  std::vector<Coords> basis_;
};

// Free-function forms.
FiberProblem fiber_matrix(const Operator& op, const Vec& k, double radius, double h, double eps);
double ids_oracle(const Operator& op, double tau, double h, double eps, int k_points, double radius = 0.0);
double spectral_function_oracle(const Vec& x, double tau, const Operator& op, double h, double eps, int k_points,
                                double radius = 0.0);
double propagation_norm(const Operator& op, const XiFunction& q1, const XiFunction& q2, double T, double h,
                        double eps, int k_samples, double radius = 0.0);

bool is_periodic(const FrequencyModule& module);

}  // namespace apgauge
