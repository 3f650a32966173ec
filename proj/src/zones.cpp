#include "apgauge/zones.hpp"

#include "apgauge/errors.hpp"
#include "apgauge/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <sstream>

namespace apgauge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<long long> projector_key(const QuasiLatticeSubspace& V) {
  std::vector<long long> key{V.dim()};
  const Eigen::MatrixXd P = V.projector();
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = i; j < P.cols(); ++j) key.push_back(std::llround(P(i, j) * 1e7));
  return key;
}

int numeric_rank(const std::vector<Vec>& vs) {
  if (vs.empty()) return 0;
  Eigen::MatrixXd M(vs.front().size(), static_cast<Eigen::Index>(vs.size()));
  for (std::size_t i = 0; i < vs.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = vs[i];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  lu.setThreshold(1e-9);
  return static_cast<int>(lu.rank());
}

// Orthonormal basis of the complement of g.
Eigen::MatrixXd tangent_basis(const Vec& g) {
  const Eigen::Index d = g.size();
  Eigen::MatrixXd A(d, 1);
  A.col(0) = g;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
  const Eigen::MatrixXd Q = qr.householderQ();
  return Q.rightCols(d - 1);
}

}  // namespace

double ZoneParams::gamma(int j) const {
  if (delta.empty()) throw ConfigError("zone params: delta is empty");
  const std::size_t k = static_cast<std::size_t>(std::clamp(j, 1, static_cast<int>(delta.size())) - 1);
  return c * std::sqrt(eps_zone()) * std::pow(h, -delta[k]);
}

double ZoneParams::shell_scale() const { return std::pow(h, 1.0 - varsigma); }

double ZoneParams::shell_width() const { return C0 * eps + shell_scale(); }

ZoneParams ZoneParams::defaults(int d, double eps, double h, int K, double sup_b, double vartheta) {
  ZoneParams p;
  p.eps = eps;
  p.h = h;
  p.vartheta = vartheta > 0 ? vartheta : std::log(p.eps_zone()) / std::log(h);
  const int steps = std::max(K, 1);
  const int levels = std::max(d - 1, 1);
  for (int j = 1; j <= levels; ++j) p.delta.push_back(p.vartheta / (6.0 * steps) * j);
  p.varsigma = p.delta[0] / 2;
  p.sigma = p.delta[0] / 4;
  p.C0 = 2 * sup_b;
  return p;
}

void ZoneParams::validate() const {
  auto bad = [](const std::string& m) { throw ConfigError("zone params: " + m); };
  if (!(h > 0 && h < 1)) bad("h must lie in (0, 1), got " + fmt(h));
  if (!(eps >= 0)) bad("epsilon must be >= 0, got " + fmt(eps));
  if (!(vartheta > 0)) bad("vartheta must be positive, got " + fmt(vartheta));
  const double ez = eps_zone();
  if (std::pow(h, vartheta) < ez * (1 - 1e-12))
    bad("need h^vartheta >= max(eps, h): h^vartheta = " + fmt(std::pow(h, vartheta)) + " < " + fmt(ez) +
        "; lower vartheta to at most " + fmt(std::log(ez) / std::log(h)));
  if (delta.empty()) bad("delta must have at least one entry");
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (!(delta[i] > 0)) bad("delta_" + std::to_string(i + 1) + " must be positive");
    if (i > 0 && !(delta[i] > delta[i - 1])) bad("delta must be strictly increasing");
  }
  if (!(varsigma >= 0 && varsigma < delta[0]))
    bad("need 0 <= varsigma < delta_1, got varsigma = " + fmt(varsigma) + ", delta_1 = " + fmt(delta[0]));
  if (!(sigma > 0)) bad("sigma must be positive");
  if (!(c > 0)) bad("c must be positive");
  if (!(C0 >= 0)) bad("C0 must be >= 0");
  if (!(diameter_factor > 0)) bad("diameter_factor must be positive");
  if (!(gamma(1) < 1))
    bad("gamma_1 = " + fmt(gamma(1)) + " must be < 1 (empty non-resonant regime); decrease c or delta");
}

std::size_t EnergyShell::total_cells() const {
  std::size_t t = 1;
  for (int k : n) t *= static_cast<std::size_t>(k);
  return t;
}

std::vector<int> EnergyShell::unravel(std::size_t linear) const {
  std::vector<int> idx(n.size());
  for (std::size_t a = 0; a < n.size(); ++a) {
    idx[a] = static_cast<int>(linear % static_cast<std::size_t>(n[a]));
    linear /= static_cast<std::size_t>(n[a]);
  }
  return idx;
}

std::optional<std::size_t> EnergyShell::ravel(const std::vector<int>& idx) const {
  std::size_t lin = 0, mult = 1;
  for (std::size_t a = 0; a < n.size(); ++a) {
    if (idx[a] < 0 || idx[a] >= n[a]) return std::nullopt;
    lin += static_cast<std::size_t>(idx[a]) * mult;
    mult *= static_cast<std::size_t>(n[a]);
  }
  return lin;
}

Vec EnergyShell::center(std::size_t linear) const {
  const auto idx = unravel(linear);
  Vec c(dimension());
  for (int a = 0; a < dimension(); ++a) c[a] = box.lo[a] + (idx[static_cast<std::size_t>(a)] + 0.5) * step;
  return c;
}

std::optional<std::size_t> EnergyShell::locate(const Vec& xi) const {
  std::vector<int> idx(n.size());
  for (std::size_t a = 0; a < n.size(); ++a) {
    const double t = (xi[static_cast<Eigen::Index>(a)] - box.lo[static_cast<Eigen::Index>(a)]) / step;
    if (!(t >= 0)) return std::nullopt;
    idx[a] = static_cast<int>(std::floor(t));
  }
  const auto lin = ravel(idx);
  if (!lin) return std::nullopt;
  const auto it = std::lower_bound(cells.begin(), cells.end(), *lin);
  if (it == cells.end() || *it != *lin) return std::nullopt;
  return static_cast<std::size_t>(it - cells.begin());
}

EnergyShell make_shell(const BaseSymbol& a0, double tau, const ZoneParams& p, double step, std::optional<Box> box) {
  EnergyShell s;
  s.tau = tau;
  s.width = p.shell_width();
  s.step = step > 0 ? step : std::min(p.gamma(1) / 8, p.shell_scale() / 4);
  const int d = a0.dimension();
  if (!box) {
    const double R = a0.radius_bound(tau + s.width) + 2 * s.step;
    Vec lo = Vec::Constant(d, -R);
    box = make_box(lo, -lo);
  }
  s.box = *box;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) {
    const double len = s.box.hi[a] - s.box.lo[a];
    if (!(len > 0)) throw ConfigError("shell box must have positive extent");
    const int k = static_cast<int>(std::ceil(len / s.step - 1e-9));
    s.n.push_back(k);
    s.box.hi[a] = s.box.lo[a] + k * s.step;
    total *= static_cast<std::size_t>(k);
    if (total > 50000000) throw ResourceError("shell grid exceeds 5e7 cells; increase the step");
  }
  std::vector<char> in(total, 0);
  parallel_for(total, 0, [&](std::size_t i) { in[i] = std::abs(a0(s.center(i)) - tau) <= s.width ? 1 : 0; });
  for (std::size_t i = 0; i < total; ++i)
    if (in[i]) s.cells.push_back(i);
  return s;
}

std::vector<std::size_t> ZoneDecomposition::nonresonant_cells() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < component.size(); ++i)
    if (component[i] < 0) out.push_back(i);
  return out;
}

std::size_t ZoneDecomposition::resonant_cell_count() const {
  return static_cast<std::size_t>(std::count_if(component.begin(), component.end(), [](int c) { return c >= 0; }));
}

double microhyperbolicity_margin(const BaseSymbol& a0, double lambda, const EnergyShell& shell) {
  double m = kInf;
  for (std::size_t c : shell.cells) {
    const Vec xi = shell.center(c);
    m = std::min(m, std::abs(a0(xi) - lambda) + a0.gradient(xi).norm());
  }
  return m;
}

double convexity_margin(const BaseSymbol& a0, double lambda, const EnergyShell& shell) {
  if (a0.dimension() == 1) return kInf;
  double m = kInf;
  for (std::size_t c : shell.cells) {
    Vec xi = shell.center(c);
    bool ok = true;
    for (int it = 0; it < 30; ++it) {
      const Vec g = a0.gradient(xi);
      const double g2 = g.squaredNorm();
      if (g2 < 1e-24) {
        ok = false;
        break;
      }
      const double r = a0(xi) - lambda;
      xi -= r / g2 * g;
      if (std::abs(r) < 1e-14) break;
    }
    if (!ok) return 0.0;  // critical point: no tangent plane
    const Eigen::MatrixXd T = tangent_basis(a0.gradient(xi));
    const Eigen::MatrixXd H = T.transpose() * a0.hessian(xi) * T;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    m = std::min(m, es.eigenvalues().minCoeff());
  }
  return m;
}

std::pair<int, std::vector<Coords>> resonance_level(const BaseSymbol& a0, const Vec& xi,
                                                    const FrequencyModule& module,
                                                    const std::vector<Coords>& nonzero, const ZoneParams& params) {
  const int d = a0.dimension();
  const Vec g = a0.gradient(xi);
  for (int j = d; j >= 1; --j) {
    const double gam = params.gamma(j);
    std::vector<Vec> picked;
    std::vector<Coords> wit;
    for (const auto& th : nonzero) {  // sorted lexicographically
      const Vec e = module.embed(th);
      if (!(std::abs(g.dot(e)) < gam)) continue;
      picked.push_back(e);
      if (numeric_rank(picked) == static_cast<int>(picked.size())) {
        wit.push_back(th);
        if (static_cast<int>(wit.size()) == j) break;
      } else {
        picked.pop_back();
      }
    }
    if (static_cast<int>(wit.size()) >= j) return {j, wit};
  }
  return {0, {}};
}

namespace {

std::vector<std::size_t> face_neighbors(const EnergyShell& s, std::size_t pos) {
  std::vector<std::size_t> out;
  auto idx = s.unravel(s.cells[pos]);
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (int dlt : {-1, 1}) {
      idx[a] += dlt;
      if (auto lin = s.ravel(idx)) {
        const auto it = std::lower_bound(s.cells.begin(), s.cells.end(), *lin);
        if (it != s.cells.end() && *it == *lin) out.push_back(static_cast<std::size_t>(it - s.cells.begin()));
      }
      idx[a] -= dlt;
    }
  return out;
}

// Relabels components to consecutive ids ordered by their smallest cell.
void renumber(ZoneDecomposition& z) {
  std::map<int, int> remap;
  for (int& c : z.component)
    if (c >= 0 && !remap.count(c)) remap.emplace(c, static_cast<int>(remap.size()));
  std::vector<ZoneComponent> comps(remap.size());
  for (auto& old : z.components) {
    auto it = remap.find(old.id);
    if (it == remap.end()) continue;
    old.id = it->second;
    old.cells.clear();
    comps[static_cast<std::size_t>(it->second)] = std::move(old);
  }
  for (std::size_t i = 0; i < z.component.size(); ++i)
    if (z.component[i] >= 0) {
      z.component[i] = remap.at(z.component[i]);
      comps[static_cast<std::size_t>(z.component[i])].cells.push_back(i);
    }
  z.components = std::move(comps);
}

}  // namespace

int absorb_once(ZoneDecomposition& z) {
  int merged = 0;
  std::vector<int> target(z.components.size(), -1);
  for (const auto& comp : z.components) {
    int best = -1;
    for (std::size_t pos : comp.cells)
      for (std::size_t nb : face_neighbors(z.shell, pos)) {
        const int o = z.component[nb];
        if (o < 0 || o == comp.id) continue;
        const auto& oc = z.components[static_cast<std::size_t>(o)];
        if (oc.level <= comp.level) continue;
        if (best < 0 || oc.level > z.components[static_cast<std::size_t>(best)].level ||
            (oc.level == z.components[static_cast<std::size_t>(best)].level && o < best))
          best = o;
      }
    target[static_cast<std::size_t>(comp.id)] = best;
  }
  for (std::size_t i = 0; i < z.component.size(); ++i) {
    const int c = z.component[i];
    if (c >= 0 && target[static_cast<std::size_t>(c)] >= 0) z.component[i] = target[static_cast<std::size_t>(c)];
  }
  for (int t : target) merged += t >= 0 ? 1 : 0;
  if (merged > 0) renumber(z);
  return merged;
}

ZoneDecomposition classify(const BaseSymbol& a0, const EnergyShell& shell, const FrequencyModule& module,
                           const SumsetK& set, const ZoneParams& params, int threads) {
  params.validate();
  const int d = a0.dimension();
  if (module.dimension() != d) throw ConfigError("classify: module and base symbol dimensions differ");
  ZoneDecomposition z;
  z.shell = shell;
  z.params = params;
  const auto nonzero = set.nonzero();
  const std::size_t N = shell.cells.size();

  std::vector<std::pair<int, std::vector<Coords>>> lv(N);
  parallel_for(N, threads, [&](std::size_t i) {
    lv[i] = resonance_level(a0, shell.center(shell.cells[i]), module, nonzero, params);
  });

  // Flood fill over cells sharing (level, V).
  std::vector<std::vector<long long>> key(N);
  std::map<std::vector<long long>, QuasiLatticeSubspace> spaces;
  for (std::size_t i = 0; i < N; ++i) {
    if (lv[i].first == 0) continue;
    const auto V = make_subspace(module, lv[i].second);
    key[i] = projector_key(V);
    spaces.emplace(key[i], V);
  }
  z.component.assign(N, -1);
  for (std::size_t i = 0; i < N; ++i) {
    if (lv[i].first == 0 || z.component[i] >= 0) continue;
    ZoneComponent comp;
    comp.id = static_cast<int>(z.components.size());
    comp.level = lv[i].first;
    comp.V = spaces.at(key[i]);
    comp.witnesses = lv[i].second;
    std::deque<std::size_t> q{i};
    z.component[i] = comp.id;
    while (!q.empty()) {
      const std::size_t p = q.front();
      q.pop_front();
      for (std::size_t nb : face_neighbors(shell, p))
        if (z.component[nb] < 0 && lv[nb].first == comp.level && key[nb] == key[i]) {
          z.component[nb] = comp.id;
          q.push_back(nb);
        }
    }
    z.components.push_back(std::move(comp));
  }
  renumber(z);

  while (absorb_once(z) > 0) {
    ++z.absorption_passes;
    if (z.absorption_passes > d) throw DecompositionError("classify: absorption did not terminate");
  }

  bool critical = false;
  const double half = shell.step / 2;
  for (auto& comp : z.components) {
    critical = critical || comp.level >= d;
    Vec lo = Vec::Constant(d, kInf), hi = Vec::Constant(d, -kInf);
    std::vector<Vec> centers;
    for (std::size_t pos : comp.cells) {
      const Vec c = shell.center(shell.cells[pos]);
      lo = lo.cwiseMin(c - Vec::Constant(d, half));
      hi = hi.cwiseMax(c + Vec::Constant(d, half));
      centers.push_back(c);
    }
    comp.bbox = make_box(lo, hi);
    double diam = 0.0;
    for (std::size_t a = 0; a < centers.size(); ++a)
      for (std::size_t b = a + 1; b < centers.size(); ++b) diam = std::max(diam, (centers[a] - centers[b]).norm());
    comp.diameter = diam + shell.step * std::sqrt(static_cast<double>(d));

    comp.transverse_margin = kInf;
    comp.inner_max = 0.0;
    for (const auto& c : centers) {
      const Vec g = a0.gradient(c);
      for (const auto& th : nonzero) {
        const Vec e = module.embed(th);
        const double v = std::abs(g.dot(e));
        if (comp.V.contains(e))
          comp.inner_max = std::max(comp.inner_max, v);
        else
          comp.transverse_margin = std::min(comp.transverse_margin, v);
      }
    }
    if (comp.level < d) {
      const double bound = params.diameter_factor * params.c * params.gamma(comp.level);
      if (comp.diameter > bound)
        throw DecompositionError("classify: component " + std::to_string(comp.id) + " (level " +
                                 std::to_string(comp.level) + ") has diameter " + fmt(comp.diameter) +
                                 " > " + fmt(bound) + "; the shell is too thick for gamma (reduce C0 or eps)");
    }
  }
  if (critical)
    z.notes.push_back("cells resonant in every direction found: microhyperbolicity fails on part of the shell");
  if (d == 1) z.notes.push_back("d = 1: no proper resonance levels; only critical cells can be resonant");
  return z;
}

double arc_measure(const BaseSymbol& a0, const Vec& theta, double gamma, double lambda) {
  if (a0.dimension() != 2) throw UnsupportedError("arc_measure needs d = 2");
  if (lambda <= a0.infimum() || gamma <= 0) return 0.0;
  // Sigma_lambda is star-shaped about 0: xi(phi) = r(phi) u(phi).
  auto radius = [&](double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const auto& w = a0.weights();
    const double q = w[0] * c * c + w[1] * s * s;
    if (a0.kind() == BaseKind::Quartic) {
      const double k = a0.quartic_coefficient();
      return std::sqrt((-1 + std::sqrt(1 + 4 * k * lambda)) / (2 * k));
    }
    if (q <= 0) throw NumericalError("arc_measure: level set is unbounded");
    return std::sqrt(lambda / q);
  };
  auto point = [&](double phi) { return make_vec({radius(phi) * std::cos(phi), radius(phi) * std::sin(phi)}); };
  auto g = [&](double phi) { return std::abs(a0.gradient(point(phi)).dot(theta)) - gamma; };
  auto speed = [&](double phi) {
    const Vec xi = point(phi);
    const Vec grad = a0.gradient(xi);
    const Vec u = make_vec({std::cos(phi), std::sin(phi)});
    return xi.norm() * grad.norm() / std::abs(grad.dot(u));
  };
  using GL = boost::math::quadrature::gauss<double, 10>;
  const int n = 4096;
  const double dphi = 2 * kPi / n;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = i * dphi, b = (i + 1) * dphi;
    const double ga = g(a), gb = g(b);
    if ((ga < 0) == (gb < 0)) {
      if (g(0.5 * (a + b)) < 0) total += GL::integrate(speed, a, b);
      continue;
    }
    std::uintmax_t iters = 100;
    const auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(50),
                                                     iters);
    const double root = 0.5 * (r.first + r.second);
    total += ga < 0 ? GL::integrate(speed, a, root) : GL::integrate(speed, root, b);
  }
  return total;
}

double smooth_step(double t) {
  if (t <= 0) return 0.0;
  if (t >= 1) return 1.0;
  const double f = std::exp(-1.0 / t), g = std::exp(-1.0 / (1 - t));
  return f / (f + g);
}

CutoffSymbol::CutoffSymbol(Box region, double ell) : region_(std::move(region)), ell_(ell) {
  if (!(ell > 0)) throw ConfigError("cutoff margin must be positive");
}

Box CutoffSymbol::support() const {
  const Vec m = Vec::Constant(region_.dimension(), ell_);
  return make_box(region_.lo - m, region_.hi + m);
}

double CutoffSymbol::operator()(const Vec& xi) const {
  double q = 1.0;
  for (int a = 0; a < region_.dimension() && q > 0; ++a)
    q *= smooth_step((xi[a] - (region_.lo[a] - ell_)) / ell_) * smooth_step(((region_.hi[a] + ell_) - xi[a]) / ell_);
  return q;
}

std::pair<double, double> CutoffSymbol::scaled_derivative_bounds(const std::vector<Vec>& samples) const {
  const int d = region_.dimension();
  const double eta = ell_ * 1e-3;
  double d1 = 0.0, d2 = 0.0;
  for (const auto& x : samples) {
    const double q0 = (*this)(x);
    for (int a = 0; a < d; ++a) {
      Vec ea = Vec::Zero(d);
      ea[a] = eta;
      const double qp = (*this)(x + ea), qm = (*this)(x - ea);
      d1 = std::max(d1, std::abs(qp - qm) / (2 * eta) * ell_);
      d2 = std::max(d2, std::abs(qp - 2 * q0 + qm) / (eta * eta) * ell_ * ell_);
      for (int b = a + 1; b < d; ++b) {
        Vec eb = Vec::Zero(d);
        eb[b] = eta;
        const double m = ((*this)(x + ea + eb) - (*this)(x + ea - eb) - (*this)(x - ea + eb) + (*this)(x - ea - eb)) /
                         (4 * eta * eta);
        d2 = std::max(d2, std::abs(m) * ell_ * ell_);
      }
    }
  }
  return {d1, d2};
}

CutoffSymbol build_cutoff(const Box& region, double ell, double h, double varsigma) {
  const double floor = std::pow(h, 1.0 - varsigma);
  if (ell < floor * (1 - 1e-12))
    throw UncertaintyError("cutoff margin " + fmt(ell) + " is below h^(1-varsigma) = " + fmt(floor));
  for (int a = 0; a < region.dimension(); ++a)
    if (!(region.hi[a] >= region.lo[a])) throw ConfigError("cutoff region is empty");
  return CutoffSymbol(region, ell);
}

}  // namespace apgauge
