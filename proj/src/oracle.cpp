#include "apgauge/oracle.hpp"

#include "apgauge/errors.hpp"
#include "apgauge/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace apgauge {

bool is_periodic(const FrequencyModule& module) {
  return module.rank() == module.dimension() && module.generators_independent();
}

namespace {

using Solver = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>;

double hermitian_defect(const Eigen::MatrixXcd& M) {
  return (M - M.adjoint()).cwiseAbs().maxCoeff();
}

// x in reduced coordinates u = G^T x / (2 pi), folded into [0, 1).
Vec reduced_position(const Eigen::MatrixXd& G, const Vec& x) {
  Vec u = (G.transpose() * Eigen::VectorXd(x)) / (2 * kPi);
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] -= std::floor(u[i]);
  return u;
}

}  // namespace

BlochOracle::BlochOracle(Operator op, double h, double eps, double tau_max, OracleControls ctl)
    : op_(std::move(op)), h_(h), eps_(eps), tau_max_(tau_max), ctl_(ctl) {
  if (!(h > 0)) throw ConfigError("oracle: h must be positive");
  if (ctl_.k_points < 1) throw ConfigError("oracle: k_points must be >= 1");
  const FrequencyModule& mod = *op_.module();
  if (op_.a0.dimension() != mod.dimension()) throw ConfigError("oracle: base symbol and module dimensions differ");
  if (mod.dimension() > 2) throw UnsupportedError("oracle: only d = 1, 2 are supported");
  if (!is_periodic(mod)) throw UnsupportedError("oracle: frequency module is not a lattice (periodic case only)");
  G_ = mod.generators();
  const int d = mod.dimension();
  norm_ = std::abs(G_.determinant()) / std::pow(2 * kPi, d);

  const double r0 = op_.a0.radius_bound(std::max(tau_max, 0.0) + 4.0) + 1.0;
  Box box{Vec::Constant(d, -r0), Vec::Constant(d, r0)};
  sup_b_ = op_.b.empty() ? 0.0 : sup_norm_estimate(op_.b, box, d == 1 ? 257 : 41);

  if (ctl_.radius > 0) {
    radius_ = ctl_.radius;
  } else {
    // Cutoff energy above tau + eps sup|B| + margin, plus room for a chain of
    // couplings so that truncation leaks stay far below the eigenvalue spacing.
    double reach = 0.0;
    for (const auto& [c, t] : op_.b.terms()) reach = std::max(reach, t.freq.embedding.norm());
    const int steps = d == 1 ? 30 : 4;
    const double rx = op_.a0.radius_bound(tau_max + std::abs(eps) * sup_b_ + ctl_.margin);
    const double rf = op_.a0.radius_bound(std::max(tau_max, 0.0));
    radius_ = std::max(rx / h, rf / h + steps * reach) + 0.5 * G_.norm();
  }
  basis_ = make_basis(radius_);

  {
    Vec k = Vec::Constant(d, 0.123);
    const Eigen::MatrixXcd M = build(k, basis_);
    const double defect = hermitian_defect(M);
    if (defect > 1e-12 * std::max(1.0, std::abs(eps)))
      throw NumericalError("oracle: fiber matrix is not Hermitian (defect " + std::to_string(defect) + ")");
  }

  if (ctl_.doubling_checks > 0 && ctl_.radius <= 0) {
    const double factor = d == 1 ? 2.0 : 1.5;
    const auto big = make_basis(factor * radius_);
    const double probes[] = {-0.37, 0.11, 0.43, -0.05, 0.29};
    for (int i = 0; i < ctl_.doubling_checks && i < 5; ++i) {
      Vec k(d);
      for (int j = 0; j < d; ++j) k[j] = probes[(i + 2 * j) % 5];
      Solver s1(build(k, basis_), Eigen::EigenvaluesOnly), s2(build(k, big), Eigen::EigenvaluesOnly);
      auto cnt = [&](const Solver& s) {
        int c = 0;
        for (Eigen::Index m = 0; m < s.eigenvalues().size(); ++m) c += s.eigenvalues()[m] <= tau_max ? 1 : 0;
        return c;
      };
      if (cnt(s1) != cnt(s2))
        throw ResourceError("oracle: enlarging the plane-wave basis changes the fiber count at k-sample " +
                            std::to_string(i) + " (radius " + std::to_string(radius_) + ")");
    }
  }
}

std::vector<Coords> BlochOracle::make_basis(double radius) const {
  const int d = static_cast<int>(G_.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G_);
  const double smin = svd.singularValues()[d - 1];
  const long long lim = static_cast<long long>(std::ceil(radius / smin)) + 1;
  std::vector<Coords> out;
  Coords n(static_cast<std::size_t>(d), -lim);
  while (true) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = static_cast<double>(n[static_cast<std::size_t>(i)]);
    if ((G_ * v).norm() <= radius) out.push_back(n);
    int i = 0;
    while (i < d && ++n[static_cast<std::size_t>(i)] > lim) n[static_cast<std::size_t>(i++)] = -lim;
    if (i == d) break;
  }
  if (out.size() > 20000) throw ResourceError("oracle: plane-wave basis exceeds 20000 states");
  return out;
}

Vec BlochOracle::momentum(const Vec& k, const Coords& n) const {
  Eigen::VectorXd u = k;
  for (Eigen::Index i = 0; i < u.size(); ++i) u[i] += static_cast<double>(n[static_cast<std::size_t>(i)]);
  return Vec(h_ * (G_ * u));
}

Eigen::MatrixXcd BlochOracle::build(const Vec& k, const std::vector<Coords>& basis) const {
  const auto N = static_cast<Eigen::Index>(basis.size());
  std::unordered_map<Coords, Eigen::Index, CoordsHash> index;
  index.reserve(basis.size());
  for (Eigen::Index i = 0; i < N; ++i) index.emplace(basis[static_cast<std::size_t>(i)], i);
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(N, N);
  const int d = static_cast<int>(G_.rows());
  for (Eigen::Index i = 0; i < N; ++i) {
    const Coords& n = basis[static_cast<std::size_t>(i)];
    M(i, i) += op_.a0(momentum(k, n));
    if (eps_ == 0.0) continue;
    for (const auto& [theta, term] : op_.b.terms()) {
      Coords m(n.size());
      for (std::size_t a = 0; a < n.size(); ++a) m[a] = n[a] - theta[a];
      auto it = index.find(m);
      if (it == index.end()) continue;
      Vec mid(d);
      Eigen::VectorXd u = k;
      for (int a = 0; a < d; ++a)
        u[a] += 0.5 * static_cast<double>(n[static_cast<std::size_t>(a)] + m[static_cast<std::size_t>(a)]);
      mid = h_ * (G_ * u);
      M(i, it->second) += eps_ * term.coeff(mid);
    }
  }
  return M;
}

FiberProblem BlochOracle::fiber(const Vec& k) const {
  FiberProblem fp;
  fp.k = k;
  fp.radius = radius_;
  fp.basis = basis_;
  fp.M = build(k, basis_);
  return fp;
}

std::vector<double> BlochOracle::eigenvalues(const Vec& k) const {
  if (eps_ == 0.0) {
    std::vector<double> ev(basis_.size());
    for (std::size_t i = 0; i < basis_.size(); ++i) ev[i] = op_.a0(momentum(k, basis_[i]));
    std::sort(ev.begin(), ev.end());
    return ev;
  }
  Solver s(build(k, basis_), Eigen::EigenvaluesOnly);
  if (s.info() != Eigen::Success) throw NumericalError("oracle: eigensolver failed");
  const auto& ev = s.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

int BlochOracle::count(const Vec& k, double tau) const {
  if (tau > tau_max_ * (1 + 1e-12) + 1e-12) throw ConfigError("oracle: tau above the constructed tau_max");
  int c = 0;
  for (double e : eigenvalues(k)) c += e <= tau ? 1 : 0;
  return c;
}

std::vector<Vec> BlochOracle::k_grid(int n) const {
  const int d = static_cast<int>(G_.rows());
  Box cell{Vec::Constant(d, -0.5), Vec::Constant(d, 0.5)};
  return sample_grid(cell, n);
}

std::vector<double> BlochOracle::jumps_1d(double tau) const {
  const int N = ctl_.k_points;
  std::vector<double> ks(static_cast<std::size_t>(N) + 1);
  std::vector<int> cs(ks.size());
  for (int j = 0; j <= N; ++j) ks[static_cast<std::size_t>(j)] = -0.5 + static_cast<double>(j) / N;
  parallel_for(ks.size(), ctl_.threads, [&](std::size_t j) { cs[j] = count(make_vec({ks[j]}), tau); });
  std::vector<double> jumps;
  std::function<void(double, double, int, int)> refine = [&](double a, double b, int ca, int cb) {
    if (ca == cb) return;
    if (b - a <= ctl_.jump_tol) {
      jumps.push_back(0.5 * (a + b));
      return;
    }
    const double m = 0.5 * (a + b);
    const int cm = count(make_vec({m}), tau);
    refine(a, m, ca, cm);
    refine(m, b, cm, cb);
  };
  for (int j = 0; j < N; ++j)
    refine(ks[static_cast<std::size_t>(j)], ks[static_cast<std::size_t>(j) + 1], cs[static_cast<std::size_t>(j)],
           cs[static_cast<std::size_t>(j) + 1]);
  return jumps;
}

double BlochOracle::ids(double tau) const {
  const int d = static_cast<int>(G_.rows());
  if (d == 1 && ctl_.refine_1d) {
    // count is piecewise constant in k: integrate exactly between the
    // located jumps, sampling each piece at its midpoint
    std::vector<double> br = jumps_1d(tau);
    br.insert(br.begin(), -0.5);
    br.push_back(0.5);
    std::vector<double> part(br.size() - 1, 0.0);
    parallel_for(part.size(), ctl_.threads, [&](std::size_t i) {
      const double a = br[i], b = br[i + 1];
      if (b - a <= 0) return;
      part[i] = (b - a) * count(make_vec({0.5 * (a + b)}), tau);
    });
    double total = 0.0;
    for (double p : part) total += p;
    return norm_ * total;
  }
  return ids(std::vector<double>{tau}).front();
}

std::vector<double> BlochOracle::ids(const std::vector<double>& taus) const {
  const int d = static_cast<int>(G_.rows());
  if (d == 1 && ctl_.refine_1d) {
    std::vector<double> out;
    for (double t : taus) out.push_back(ids(t));
    return out;
  }
  for (double t : taus)
    if (t > tau_max_ * (1 + 1e-12) + 1e-12) throw ConfigError("oracle: tau above the constructed tau_max");
  const auto ks = k_grid(ctl_.k_points);
  std::vector<std::vector<double>> evs(ks.size());
  parallel_for(ks.size(), ctl_.threads, [&](std::size_t i) { evs[i] = eigenvalues(ks[i]); });
  std::vector<double> out;
  for (double t : taus) {
    double total = 0.0;
    for (const auto& ev : evs)
      total += static_cast<double>(std::upper_bound(ev.begin(), ev.end(), t) - ev.begin());
    out.push_back(norm_ * total / static_cast<double>(ks.size()));
  }
  return out;
}

std::vector<double> BlochOracle::spectral_function(const std::vector<Vec>& xs, double tau) const {
  const int d = static_cast<int>(G_.rows());
  struct Node {
    Vec k;
    double w;
  };
  std::vector<Node> nodes;
  if (d == 1 && ctl_.refine_1d) {
    std::vector<double> br = jumps_1d(tau);
    br.insert(br.begin(), -0.5);
    br.push_back(0.5);
    using GL = boost::math::quadrature::gauss<double, 8>;
    const double pw = 1.0 / ctl_.panels_1d;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
      const double a = br[i], b = br[i + 1];
      if (b - a <= 0) continue;
      const int np = std::max(1, static_cast<int>(std::ceil((b - a) / pw)));
      for (int p = 0; p < np; ++p) {
        const double pa = a + (b - a) * p / np, pb = a + (b - a) * (p + 1) / np;
        const double c = 0.5 * (pa + pb), r = 0.5 * (pb - pa);
        const auto& xa = GL::abscissa();
        const auto& wa = GL::weights();
        for (std::size_t q = 0; q < xa.size(); ++q) {
          if (xa[q] == 0.0) {
            nodes.push_back({make_vec({c}), r * wa[q]});
          } else {
            nodes.push_back({make_vec({c - r * xa[q]}), r * wa[q]});
            nodes.push_back({make_vec({c + r * xa[q]}), r * wa[q]});
          }
        }
      }
    }
  } else {
    const auto ks = k_grid(ctl_.k_points);
    for (const auto& k : ks) nodes.push_back({k, 1.0 / static_cast<double>(ks.size())});
  }

  std::vector<Vec> us;
  for (const auto& x : xs) {
    if (x.size() != d) throw ConfigError("spectral_function: position dimension mismatch");
    us.push_back(reduced_position(G_, x));
  }
  // phase[n][x] = exp(2 pi i <n, u_x>)
  const auto N = basis_.size();
  Eigen::MatrixXcd phase(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(us.size()));
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < us.size(); ++j) {
      double a = 0.0;
      for (int c = 0; c < d; ++c) a += static_cast<double>(basis_[i][static_cast<std::size_t>(c)]) * us[j][c];
      a *= 2 * kPi;
      phase(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cplx(std::cos(a), std::sin(a));
    }

  std::vector<Eigen::VectorXd> contrib(nodes.size());
  parallel_for(nodes.size(), ctl_.threads, [&](std::size_t i) {
    Solver s(build(nodes[i].k, basis_));
    if (s.info() != Eigen::Success) throw NumericalError("oracle: eigensolver failed");
    const auto& ev = s.eigenvalues();
    Eigen::Index occ = 0;
    while (occ < ev.size() && ev[occ] <= tau) ++occ;
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(us.size()));
    if (occ > 0) {
      // psi_j(x) = sum_n V(n, j) e^{i <n, x>}
      const Eigen::MatrixXcd psi = phase.transpose() * s.eigenvectors().leftCols(occ);
      v = psi.cwiseAbs2().rowwise().sum();
    }
    contrib[i] = nodes[i].w * v;
  });
  std::vector<double> out(us.size(), 0.0);
  for (const auto& c : contrib)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += c[static_cast<Eigen::Index>(j)];
  for (double& v : out) v *= norm_;
  return out;
}

double BlochOracle::windowed_ids(double tau, const XiFunction& window) const {
  const auto ks = k_grid(ctl_.k_points);
  std::vector<double> part(ks.size(), 0.0);
  parallel_for(ks.size(), ctl_.threads, [&](std::size_t i) {
    Solver s(build(ks[i], basis_));
    const auto& ev = s.eigenvalues();
    Eigen::VectorXd q2(static_cast<Eigen::Index>(basis_.size()));
    for (std::size_t n = 0; n < basis_.size(); ++n) {
      const double q = window(momentum(ks[i], basis_[n]));
      q2[static_cast<Eigen::Index>(n)] = q * q;
    }
    double acc = 0.0;
    for (Eigen::Index j = 0; j < ev.size() && ev[j] <= tau; ++j)
      acc += q2.dot(s.eigenvectors().col(j).cwiseAbs2());
    part[i] = acc;
  });
  double total = 0.0;
  for (double p : part) total += p;
  return norm_ * total / static_cast<double>(ks.size());
}

double BlochOracle::propagation_norm(const XiFunction& q1, const XiFunction& q2, double T, int k_samples) const {
  if (k_samples < 1) throw ConfigError("propagation_norm: need at least one k sample");
  const auto ks = k_grid(k_samples);
  std::vector<double> part(ks.size(), 0.0);
  parallel_for(ks.size(), ctl_.threads, [&](std::size_t i) {
    Solver s(build(ks[i], basis_));
    if (s.info() != Eigen::Success) throw NumericalError("propagation_norm: eigensolver failed");
    const auto N = static_cast<Eigen::Index>(basis_.size());
    std::vector<Eigen::Index> rows, cols;
    Eigen::VectorXd a1(N), a2(N);
    for (Eigen::Index n = 0; n < N; ++n) {
      const Vec xi = momentum(ks[i], basis_[static_cast<std::size_t>(n)]);
      a1[n] = q1(xi);
      a2[n] = q2(xi);
      if (a1[n] != 0.0) cols.push_back(n);
      if (a2[n] != 0.0) rows.push_back(n);
    }
    const Eigen::MatrixXcd& V = s.eigenvectors();
    double best = 0.0;
    for (double t : {T / 4, T / 2, T}) {
      Eigen::VectorXcd ph(N);
      for (Eigen::Index j = 0; j < N; ++j) {
        const double a = t * s.eigenvalues()[j] / h_;
        ph[j] = cplx(std::cos(a), std::sin(a));
      }
      const Eigen::MatrixXcd U = V * ph.asDiagonal() * V.adjoint();
      const double unit = (U.adjoint() * U - Eigen::MatrixXcd::Identity(N, N)).cwiseAbs().maxCoeff();
      if (unit > 1e-10)
        throw NumericalError("propagation_norm: propagator unitarity deviation " + std::to_string(unit));
      if (rows.empty() || cols.empty()) continue;
      Eigen::MatrixXcd S(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
      for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c)
          S(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              a2[rows[r]] * U(rows[r], cols[c]) * a1[cols[c]];
      Eigen::JacobiSVD<Eigen::MatrixXcd> svd(S);
      best = std::max(best, svd.singularValues()[0]);
    }
    part[i] = best;
  });
  return *std::max_element(part.begin(), part.end());
}

// ---------------------------------------------------------------------------

FiberProblem fiber_matrix(const Operator& op, const Vec& k, double radius, double h, double eps) {
  OracleControls ctl;
  ctl.radius = radius;
  ctl.doubling_checks = 0;
  return BlochOracle(op, h, eps, 0.0, ctl).fiber(k);
}

double ids_oracle(const Operator& op, double tau, double h, double eps, int k_points, double radius) {
  OracleControls ctl;
  ctl.k_points = k_points;
  ctl.radius = radius;
  return BlochOracle(op, h, eps, tau, ctl).ids(tau);
}

double spectral_function_oracle(const Vec& x, double tau, const Operator& op, double h, double eps, int k_points,
                                double radius) {
  OracleControls ctl;
  ctl.k_points = k_points;
  ctl.radius = radius;
  return BlochOracle(op, h, eps, tau, ctl).spectral_function({x}, tau).front();
}

double propagation_norm(const Operator& op, const XiFunction& q1, const XiFunction& q2, double T, double h,
                        double eps, int k_samples, double radius) {
  // Cover the cutoff supports: largest sampled |xi| where either cutoff is nonzero.
  const int d = op.dimension();
  const double step = h / 4;
  double extent = 0.0;
  const int n = static_cast<int>(std::ceil(10.0 / step));
  if (d == 1) {
    for (int i = -n; i <= n; ++i) {
      const Vec xi = make_vec({i * step});
      if (q1(xi) != 0.0 || q2(xi) != 0.0) extent = std::max(extent, std::abs(i * step));
    }
  } else {
    const int m = std::min(n, 400);
    const double st = 10.0 / m;
    for (int i = -m; i <= m; ++i)
      for (int j = -m; j <= m; ++j) {
        const Vec xi = make_vec({i * st, j * st});
        if (q1(xi) != 0.0 || q2(xi) != 0.0) extent = std::max(extent, xi.norm());
      }
  }
  Vec edge = Vec::Zero(d);
  edge[0] = extent + 0.25;
  OracleControls ctl;
  ctl.radius = radius;
  ctl.doubling_checks = 0;
  return BlochOracle(op, h, eps, op.a0(edge), ctl).propagation_norm(q1, q2, T, k_samples);
}

}  // namespace apgauge
