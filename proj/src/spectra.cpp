#include "apgauge/spectra.hpp"

#include "apgauge/errors.hpp"
#include "apgauge/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace apgauge {

namespace {

using Interval = std::pair<double, double>;
using Fn1 = std::function<double(double)>;

double find_root(const Fn1& g, double a, double b, double ga, double gb) {
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, boost::math::tools::eps_tolerance<double>(50),
                                                   iters);
  return 0.5 * (r.first + r.second);
}

// Pieces of [a, b] where g <= 0; g = f - tau with values ga, gb at the ends.
void sublevel_1d(const Fn1& g, double a, double b, double ga, double gb, int depth, std::vector<Interval>& out) {
  if ((ga <= 0) != (gb <= 0)) {
    const double r = find_root(g, a, b, ga, gb);
    out.push_back(ga <= 0 ? Interval{a, r} : Interval{r, b});
    return;
  }
  const double m = 0.5 * (a + b);
  const double gm = g(m);
  if ((gm <= 0) == (ga <= 0)) {
    if (ga <= 0) out.push_back({a, b});
    return;
  }
  if (depth == 0) {
    // a bump narrower than the cell: split at the midpoint root pair
    sublevel_1d(g, a, m, ga, gm, 0, out);
    sublevel_1d(g, m, b, gm, gb, 0, out);
    return;
  }
  sublevel_1d(g, a, m, ga, gm, depth - 1, out);
  sublevel_1d(g, m, b, gm, gb, depth - 1, out);
}

double length(const std::vector<Interval>& v) {
  double s = 0.0;
  for (const auto& [a, b] : v) s += b - a;
  return s;
}

std::vector<Interval> merge(std::vector<Interval> v) {
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (iv.second <= iv.first) continue;
    if (!out.empty() && iv.first <= out.back().second + 1e-15 * std::max(1.0, std::abs(iv.first)))
      out.back().second = std::max(out.back().second, iv.second);
    else
      out.push_back(iv);
  }
  return out;
}

double phase_volume(double h, int d) { return std::pow(2 * kPi * h, -d); }

// d = 2 leaf: Gauss columns along axis 0, exact sublevel length along axis 1.
double column_measure(const XiFunction& a, double tau, const Box& cell) {
  using GL = boost::math::quadrature::gauss<double, 4>;
  const auto len = [&](double xi1) {
    const Fn1 g = [&](double t) { return a(make_vec({xi1, t})) - tau; };
    std::vector<Interval> pieces;
    sublevel_1d(g, cell.lo[1], cell.hi[1], g(cell.lo[1]), g(cell.hi[1]), 2, pieces);
    return length(pieces);
  };
  return GL::integrate(len, cell.lo[0], cell.hi[0]);
}

Vec fd_gradient(const XiFunction& a, const Vec& c, double step) {
  Vec g(c.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    Vec p = c, m = c;
    p[i] += step;
    m[i] -= step;
    g[i] = (a(p) - a(m)) / (2 * step);
  }
  return g;
}

// Measure of {a <= tau} in a d = 2 cell, refined `depth` dyadic levels
// where the level set may pass.
double cell_measure_2d(const XiFunction& a, double tau, const Box& cell, int depth) {
  const Vec c = cell.center();
  const Vec half = (cell.hi - cell.lo) / 2;
  const double vol = (cell.hi - cell.lo).prod();
  const double gc = a(c) - tau;
  const double L = fd_gradient(a, c, 0.5 * half.minCoeff()).norm();
  if (std::abs(gc) > 2 * L * half.norm()) return gc <= 0 ? vol : 0.0;
  if (depth == 0) return column_measure(a, tau, cell);
  double s = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      Box sub{cell.lo, cell.lo};
      sub.lo[0] = cell.lo[0] + i * half[0];
      sub.lo[1] = cell.lo[1] + j * half[1];
      sub.hi = sub.lo + half;
      s += cell_measure_2d(a, tau, sub, depth - 1);
    }
  return s;
}

// Measure of {a <= tau} over a set of cells (same dimension).
double cells_measure(const XiFunction& a, int d, double tau, const std::vector<Box>& cells,
                     const QuadratureControls& q) {
  if (cells.empty()) return 0.0;
  if (d == 1) {
    std::vector<double> part(cells.size(), 0.0);
    parallel_for(cells.size(), q.threads, [&](std::size_t i) {
      const Fn1 g = [&](double t) { return a(make_vec({t})) - tau; };
      const double lo = cells[i].lo[0], hi = cells[i].hi[0];
      std::vector<Interval> pieces;
      sublevel_1d(g, lo, hi, g(lo), g(hi), 2, pieces);
      part[i] = length(pieces);
    });
    return std::accumulate(part.begin(), part.end(), 0.0);
  }
  if (d != 2) throw UnsupportedError("level-set quadrature supports d = 1, 2");
  double prev = 0.0;
  for (int r = 0; r <= q.max_refine; ++r) {
    std::vector<double> part(cells.size(), 0.0);
    parallel_for(cells.size(), q.threads,
                 [&](std::size_t i) { part[i] = cell_measure_2d(a, tau, cells[i], r); });
    const double total = std::accumulate(part.begin(), part.end(), 0.0);
    if (r > 0 && std::abs(total - prev) <= q.rtol * std::max(std::abs(total), 1e-300)) return total;
    if (r > 0 && total == 0.0 && prev == 0.0) return 0.0;
    prev = total;
  }
  std::ostringstream os;
  os << "level-set quadrature: refinements still differ after " << q.max_refine << " levels (last total " << prev
     << ")";
  throw QuadratureError(os.str());
}

std::vector<Box> grid_cells(const Box& region, int per_axis) {
  const int d = region.dimension();
  const Vec step = (region.hi - region.lo) / per_axis;
  std::vector<Box> out;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Box b{region.lo, region.lo};
    for (int i = 0; i < d; ++i) b.lo[i] = region.lo[i] + idx[static_cast<std::size_t>(i)] * step[i];
    b.hi = b.lo + step;
    out.push_back(b);
    int i = 0;
    while (i < d && ++idx[static_cast<std::size_t>(i)] == per_axis) idx[static_cast<std::size_t>(i++)] = 0;
    if (i == d) break;
  }
  return out;
}

Box cell_box(const EnergyShell& s, std::size_t linear) {
  const Vec c = s.center(linear);
  const Vec half = Vec::Constant(c.size(), s.step / 2);
  return Box{c - half, c + half};
}

// Component lies so far below tau that the projector is the identity there.
bool below_level(const ZoneDecomposition& z, const ZoneComponent& comp, const BaseSymbol& a0, double eps,
                 double tau) {
  const double sup_b = z.params.C0 / 2;
  for (std::size_t pos : comp.cells) {
    const Vec c = z.shell.center(z.shell.cells[pos]);
    const double lip = a0.gradient(c).norm() * z.shell.step * std::sqrt(static_cast<double>(c.size()));
    if (a0(c) + lip + std::abs(eps) * sup_b >= tau) return false;
  }
  return true;
}

double operator_sup_b(const Operator& op) {
  if (op.b.empty()) return 0.0;
  const int d = op.dimension();
  const double R = op.a0.radius_bound(4.0) + 2.0;
  return sup_norm_estimate(op.b, Box{Vec::Constant(d, -R), Vec::Constant(d, R)}, d == 1 ? 257 : 41);
}

GaugeControls steps_for(const PipelineControls& ctl, bool resonant = false) {
  GaugeControls g = resonant ? ctl.resonant_gauge : ctl.gauge;
  g.max_steps = ctl.K;
  return g;
}

XiFunction real_part(const CoefficientFn& f) {
  return [f](const Vec& xi) { return f(xi).real(); };
}

enum class CellState : char { Resonant, Below, Above, Open };

struct ShellState {
  ZoneDecomposition z;
  std::vector<CellState> cell_state;  // per shell cell
  IdsResult res;
  std::optional<GaugeChain> chain;  // non-resonant zone
  XiFunction a_eff;
  std::vector<ZoneChain> chains;
};

// Everything ids_pipeline needs, kept for the spectral function.
ShellState assemble(const Operator& op, double eps, double h, double tau, const ZoneParams& params,
                    const PipelineControls& ctl, bool allow_resonant_fibers) {
  const BaseSymbol& a0 = op.a0;
  const int d = op.dimension();
  params.validate();
  const SumsetK set = sumset(*op.module(), std::max(ctl.gauge.sumset_order, 1));
  const EnergyShell shell = make_shell(a0, tau, params);
  ShellState st{classify(a0, shell, *op.module(), set, params, ctl.threads), {}, {}, std::nullopt, {}, {}};
  const auto& z = st.z;
  const double norm = phase_volume(h, d);

  std::size_t interior = 0;
  const std::size_t total = shell.total_cells();
  for (std::size_t i = 0; i < total; ++i) {
    if (std::binary_search(shell.cells.begin(), shell.cells.end(), i)) continue;
    if (a0(shell.center(i)) < tau - shell.width) ++interior;
  }
  st.res.zones.push_back({"interior", 0, norm * static_cast<double>(interior) * shell.cell_volume(), interior});

  // Non-resonant cells the operator-norm bound |A - A0| <= eps sup|B|
  // already decides count without the gauge; the rest are its target.
  const double sup_b = operator_sup_b(op);
  st.cell_state.assign(shell.cells.size(), CellState::Resonant);
  std::vector<std::size_t> open;
  std::size_t full = 0;
  for (std::size_t pos : z.nonresonant_cells()) {
    const Vec c = shell.center(shell.cells[pos]);
    const double margin = a0.gradient(c).norm() * shell.step * std::sqrt(static_cast<double>(d)) + std::abs(eps) * sup_b;
    const double v = a0(c);
    if (v + margin < tau) {
      st.cell_state[pos] = CellState::Below;
      ++full;
    } else if (v - margin > tau) {
      st.cell_state[pos] = CellState::Above;
    } else {
      st.cell_state[pos] = CellState::Open;
      open.push_back(pos);
    }
  }
  double nonres = static_cast<double>(full) * shell.cell_volume();
  st.a_eff = [a0](const Vec& xi) { return a0(xi); };
  if (!open.empty()) {
    std::vector<Vec> pts;
    for (std::size_t pos : open) pts.push_back(shell.center(shell.cells[pos]));
    GaugeChain chain = eliminate(a0, op.b, eps, h, GaugeTarget::custom(d, pts, params.gamma(1)), params, steps_for(ctl));
    st.a_eff = real_part(chain.effective_zero(a0));
    std::vector<Box> cells;
    for (std::size_t pos : open) cells.push_back(cell_box(shell, shell.cells[pos]));
    QuadratureControls q = ctl.quad;
    q.threads = ctl.threads;
    nonres += cells_measure(st.a_eff, d, tau, cells, q);
    st.res.steps = static_cast<int>(chain.steps.size());
    st.res.converged = chain.converged;
    st.res.remainder_bound = chain.remainder_bound;
    st.res.support_exact = chain.support_exact();
    for (const auto& s : chain.steps)
      for (const auto& w : s.warnings) st.res.notes.push_back("nonresonant: " + w);
    st.chains.push_back({"nonresonant", chain});
    st.chain = std::move(chain);
  }
  st.res.zones.push_back({"nonresonant", 0, norm * nonres, z.nonresonant_cells().size()});

  for (const auto& comp : z.components) {
    ZoneContribution zc{"component:" + std::to_string(comp.id), comp.level, 0.0, comp.cells.size()};
    if (below_level(z, comp, a0, eps, tau)) {
      zc.value = norm * static_cast<double>(comp.cells.size()) * shell.cell_volume();
    } else if (allow_resonant_fibers && d == 2 && comp.level == 1) {
      GaugeChain chain = eliminate(a0, op.b, eps, h, GaugeTarget::resonant(z, comp.id), params, steps_for(ctl, true));
      st.res.converged = st.res.converged && chain.converged;
      st.res.remainder_bound = std::max(st.res.remainder_bound, chain.remainder_bound);
      st.res.support_exact = st.res.support_exact && chain.support_exact();
      zc.value = resonant_fiber_ids(z, comp.id, chain, a0, tau, h, ctl);
      st.chains.push_back({zc.zone, std::move(chain)});
    } else {
      std::ostringstream os;
      os << "resonant component " << comp.id << " (level " << comp.level << ") meets the level set tau = " << tau
         << " in d = " << d << "; use the oracle";
      throw UnsupportedError(os.str());
    }
    st.res.zones.push_back(zc);
  }
  st.res.value = 0.0;
  for (const auto& zc : st.res.zones) st.res.value += zc.value;
  return st;
}

}  // namespace

double kappa0_volume(const XiFunction& a, int d, double tau, double h, const Box& region,
                     const QuadratureControls& q) {
  if (!(h > 0)) throw ConfigError("kappa0_volume: h must be positive");
  if (region.dimension() != d) throw ConfigError("kappa0_volume: region dimension mismatch");
  const int per_axis = d == 1 ? 256 : 64;
  return phase_volume(h, d) * cells_measure(a, d, tau, grid_cells(region, per_axis), q);
}

double kappa0_volume(const BaseSymbol& a0, double tau, double h, const QuadratureControls& q) {
  const int d = a0.dimension();
  if (tau < a0.infimum()) return 0.0;
  const double R = a0.radius_bound(tau) * 1.05 + 1e-3;
  const Box region{Vec::Constant(d, -R), Vec::Constant(d, R)};
  return kappa0_volume([a0](const Vec& xi) { return a0(xi); }, d, tau, h, region, q);
}

ZoneParams pipeline_params(const Operator& op, double eps, double h, int K) {
  return ZoneParams::defaults(op.dimension(), eps, h, K, operator_sup_b(op));
}

IdsResult ids_pipeline(const Operator& op, double eps, double h, double tau, const ZoneParams& params,
                       const PipelineControls& ctl) {
  if (!(h > 0)) throw ConfigError("ids_pipeline: h must be positive");
  if (ctl.K < 0) throw ConfigError("ids_pipeline: K must be >= 0");
  if (eps == 0.0 || op.b.empty()) {
    IdsResult r;
    QuadratureControls q = ctl.quad;
    q.threads = ctl.threads;
    r.value = kappa0_volume(op.a0, tau, h, q);
    r.zones.push_back({"free", 0, r.value, 0});
    return r;
  }
  if (tau < op.a0.infimum() - std::abs(eps) * operator_sup_b(op)) {
    IdsResult r;
    r.zones.push_back({"below_spectrum", 0, 0.0, 0});
    return r;
  }
  return assemble(op, eps, h, tau, params, ctl, true).res;
}

IdsResult ids_pipeline(const Operator& op, double eps, double h, double tau, const PipelineControls& ctl) {
  return ids_pipeline(op, eps, h, tau, pipeline_params(op, eps, h, ctl.K), ctl);
}

std::vector<ZoneChain> pipeline_chains(const Operator& op, double eps, double h, double tau, const ZoneParams& params,
                                       const PipelineControls& ctl) {
  if (eps == 0.0 || op.b.empty() || tau < op.a0.infimum() - std::abs(eps) * operator_sup_b(op)) return {};
  return assemble(op, eps, h, tau, params, ctl, true).chains;
}

double resonant_fiber_ids(const ZoneDecomposition& z, int component_id, const GaugeChain& chain,
                          const BaseSymbol& a0, double tau, double h, const PipelineControls& ctl) {
  const EnergyShell& shell = z.shell;
  if (shell.dimension() != 2) throw UnsupportedError("resonant_fiber_ids: d = 2 only");
  if (component_id < 0 || component_id >= static_cast<int>(z.components.size()))
    throw ConfigError("resonant_fiber_ids: no component " + std::to_string(component_id));
  const auto& comp = z.components[static_cast<std::size_t>(component_id)];
  if (comp.level != 1 || comp.V.basis.empty()) throw UnsupportedError("resonant_fiber_ids: needs dim V = 1");

  // primitive lattice vector of V and its frequency
  Coords p = comp.V.basis.front();
  long long g = 0;
  for (long long v : p) g = std::gcd(g, v);
  for (long long& v : p) v /= g;
  const ModulePtr mod = chain.perturbation.module();
  const Vec omega = mod->frequency(p).embedding;
  const double wlen = omega.norm();
  const Vec u = omega / wlen;
  const Vec t = make_vec({-u[1], u[0]});

  // A'' along V: n -> coefficient of n p
  const APSymbol eff = chain.effective(a0);
  std::vector<std::pair<long long, CoefficientFn>> terms;
  long long nmax = 0;
  for (const auto& [c, term] : eff.terms()) {
    long long n = 0;
    bool on_line = true;
    std::size_t lead = 0;
    while (p[lead] == 0) ++lead;
    n = c[lead] / p[lead];
    for (std::size_t i = 0; i < p.size(); ++i) on_line = on_line && c[i] == n * p[i];
    if (!on_line) throw InconsistencyError("resonant_fiber_ids: effective symbol leaves V");
    terms.push_back({n, term.coeff});
    nmax = std::max(nmax, std::abs(n));
  }

  const auto in_comp = [&](const Vec& xi) {
    const auto pos = shell.locate(xi);
    return pos && z.component[*pos] == component_id;
  };

  double smin = 1e300, smax = -1e300, rmin = 1e300, rmax = -1e300;
  for (std::size_t pos : comp.cells) {
    const Vec c = shell.center(shell.cells[pos]);
    smin = std::min(smin, c.dot(t));
    smax = std::max(smax, c.dot(t));
    rmin = std::min(rmin, c.dot(u));
    rmax = std::max(rmax, c.dot(u));
  }
  const double pad = shell.step;
  smin -= pad;
  smax += pad;
  rmin -= pad;
  rmax += pad;
  const double ds = shell.step / std::max(1, ctl.fiber_s_per_cell);
  const int ns = std::max(1, static_cast<int>(std::ceil((smax - smin) / ds - 1e-9)));
  const double dss = (smax - smin) / ns;
  const double margin =
      ctl.fiber_margin > 0 ? ctl.fiber_margin : std::max(0.25, 2.0 * h * wlen * static_cast<double>(std::max(nmax, 1LL)));
  const int nk = std::max(1, ctl.fiber_k_points);

  // windowed count at one (s, k) with basis covering [rmin - R, rmax + R]
  const auto windowed = [&](double s, double k, double R) {
    const long long m0 = static_cast<long long>(std::floor((rmin - R) / (h * wlen) - k));
    const long long m1 = static_cast<long long>(std::ceil((rmax + R) / (h * wlen) - k));
    const auto N = static_cast<Eigen::Index>(m1 - m0 + 1);
    const auto xi_at = [&](double m) -> Vec { return s * t + h * (k + m) * omega; };
    // entries with equal a + b share a midpoint; composition shifts along V
    // land on neighbouring midpoints, so one memo table serves the fiber
    Eigen::MatrixXcd vals = Eigen::MatrixXcd::Zero(2 * N - 1, nmax + 1);
    EvalContext ctx;
    for (Eigen::Index j = 0; j < 2 * N - 1; ++j) {
      const Vec mid = xi_at(static_cast<double>(m0) + 0.5 * static_cast<double>(j));
      for (const auto& [tn, f] : terms)
        if (tn >= 0 && tn <= std::min<long long>(nmax, j) && (j - tn) / 2 < N && (j - tn) % 2 == 0)
          vals(j, tn) += f.evaluate(mid, ctx);
    }
    Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(N, N);
    for (Eigen::Index a = 0; a < N; ++a)
      for (Eigen::Index b = std::max<Eigen::Index>(0, a - nmax); b <= a; ++b) {
        const cplx v = vals(a + b, a - b);
        M(a, b) = v;
        M(b, a) = std::conj(v);
      }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
    if (es.info() != Eigen::Success) throw NumericalError("resonant_fiber_ids: eigensolver failed");
    Eigen::VectorXd q(N);
    for (Eigen::Index a = 0; a < N; ++a) q[a] = in_comp(xi_at(static_cast<double>(m0 + a))) ? 1.0 : 0.0;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < N && es.eigenvalues()[j] <= tau; ++j)
      acc += q.dot(es.eigenvectors().col(j).cwiseAbs2());
    return acc;
  };

  for (int probe : {0, ns / 2, ns - 1}) {
    const double s = smin + (probe + 0.5) * dss;
    const double a = windowed(s, 0.25, margin), b = windowed(s, 0.25, 2 * margin);
    if (std::abs(a - b) > ctl.fiber_tol * std::max(1.0, std::abs(b))) {
      std::ostringstream os;
      os << "resonant_fiber_ids: component " << component_id << " basis not converged (" << a << " vs " << b
         << " after doubling the margin " << margin << ")";
      throw ResourceError(os.str());
    }
  }

  std::vector<double> part(static_cast<std::size_t>(ns), 0.0);
  parallel_for(part.size(), ctl.threads, [&](std::size_t i) {
    const double s = smin + (static_cast<double>(i) + 0.5) * dss;
    // golden-ratio shift per row keeps k-lattice errors from aligning across s
    const double shift = std::fmod(static_cast<double>(i) * 0.6180339887498949, 1.0);
    double acc = 0.0;
    for (int j = 0; j < nk; ++j) acc += windowed(s, -0.5 + (j + shift) / nk, margin);
    part[i] = acc / nk;
  });
  const double integral = std::accumulate(part.begin(), part.end(), 0.0) * dss * h * wlen;
  return phase_volume(h, 2) * integral;
}

std::vector<double> spectral_function_leading(const std::vector<double>& xs, double tau, const Operator& op,
                                              double eps, double h, const ZoneParams& params,
                                              const PipelineControls& ctl) {
  if (op.dimension() != 1) throw UnsupportedError("spectral_function_leading: d = 1 only");
  if (eps == 0.0 || op.b.empty()) {
    const double v = ids_pipeline(op, eps, h, tau, params, ctl).value;
    return std::vector<double>(xs.size(), v);
  }
  const ShellState st = assemble(op, eps, h, tau, params, ctl, false);
  std::vector<double> out(xs.size(), st.res.value);
  if (!st.chain || st.chain->steps.empty()) return out;

  // sublevel set of A''_0 on the whole line
  const EnergyShell& shell = st.z.shell;
  std::vector<Interval> set;
  const Fn1 g = [&](double x) { return st.a_eff(make_vec({x})) - tau; };
  const std::size_t total = shell.total_cells();
  for (std::size_t i = 0; i < total; ++i) {
    const Box b = cell_box(shell, i);
    const auto it = std::lower_bound(shell.cells.begin(), shell.cells.end(), i);
    const bool in_shell = it != shell.cells.end() && *it == i;
    if (!in_shell) {
      if (op.a0(shell.center(i)) < tau - shell.width) set.push_back({b.lo[0], b.hi[0]});
      continue;
    }
    const auto pos = static_cast<std::size_t>(it - shell.cells.begin());
    switch (st.cell_state[pos]) {
      case CellState::Open: sublevel_1d(g, b.lo[0], b.hi[0], g(b.lo[0]), g(b.hi[0]), 2, set); break;
      case CellState::Above: break;
      default: set.push_back({b.lo[0], b.hi[0]});  // resonant cells here lie below the level set
    }
  }
  set = merge(std::move(set));
  const auto Pi = [&](double x) {
    for (const auto& [a, b] : set)
      if (x >= a && x <= b) return 1.0;
    return 0.0;
  };

  // (i/h)[eps P, Pi]_theta = (i/h) eps P_theta(xi) (Pi(xi - theta h/2) - Pi(xi + theta h/2))
  const APSymbol G = st.chain->steps.front().P.scaled(eps);
  using GL = boost::math::quadrature::gauss<double, 20>;
  std::vector<std::pair<double, cplx>> modes;  // (theta, integral)
  for (const auto& [c, term] : G.terms()) {
    const double th = term.freq.embedding[0];
    const double a = th * h / 2;
    std::vector<double> br;
    for (const auto& [lo, hi] : set)
      for (double e : {lo, hi}) {
        br.push_back(e + a);
        br.push_back(e - a);
      }
    std::sort(br.begin(), br.end());
    cplx acc = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) {
      const double lo = br[i], hi = br[i + 1];
      if (hi - lo <= 0) continue;
      const double mid = 0.5 * (lo + hi);
      const double jump = Pi(mid - a) - Pi(mid + a);
      if (jump == 0.0) continue;
      const auto re = [&](double x) { return term.coeff(make_vec({x})).real(); };
      const auto im = [&](double x) { return term.coeff(make_vec({x})).imag(); };
      acc += jump * cplx(GL::integrate(re, lo, hi), GL::integrate(im, lo, hi));
    }
    modes.push_back({th, cplx(0.0, 1.0 / h) * acc});
  }
  const double norm = phase_volume(h, 1);
  for (std::size_t j = 0; j < xs.size(); ++j) {
    cplx s = 0.0;
    for (const auto& [th, v] : modes) s += v * cplx(std::cos(th * xs[j]), std::sin(th * xs[j]));
    out[j] += norm * s.real();
  }
  return out;
}

double spectral_function_leading(double x, double tau, const Operator& op, double eps, double h,
                                 const ZoneParams& params, const PipelineControls& ctl) {
  return spectral_function_leading(std::vector<double>{x}, tau, op, eps, h, params, ctl).front();
}

double spectral_function_leading(double x, double tau, const Operator& op, double eps, double h,
                                 const PipelineControls& ctl) {
  return spectral_function_leading(x, tau, op, eps, h, pipeline_params(op, eps, h, ctl.K), ctl);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ConfigError("loglog_slope: size mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] > 0 && y[i] > 0) {
      lx.push_back(std::log(x[i]));
      ly.push_back(std::log(y[i]));
    }
  if (lx.size() < 2) throw ConfigError("loglog_slope: need two positive points");
  const double n = static_cast<double>(lx.size());
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw ConfigError("loglog_slope: x values coincide");
  return sxy / sxx;
}

std::vector<std::string> SpectralTable::zone_columns() const {
  std::vector<std::string> cols;
  for (const auto& r : rows)
    for (const auto& [k, v] : r.zones)
      if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  return cols;
}

std::string SpectralTable::csv() const {
  const auto cols = zone_columns();
  std::ostringstream os;
  os << "h,epsilon,tau,K,n_pipeline,n_oracle,abs_err";
  for (const auto& c : cols) os << "," << c;
  os << ",flag\n";
  for (const auto& r : rows) {
    os << format_number(r.h) << "," << format_number(r.eps) << "," << format_number(r.tau) << "," << r.K << ","
       << (r.has_pipeline ? format_number(r.n_pipeline) : "") << "," << (r.has_oracle ? format_number(r.n_oracle) : "") << ","
       << (r.has_pipeline && r.has_oracle ? format_number(r.abs_err) : "");
    for (const auto& c : cols) {
      os << ",";
      if (auto it = r.zones.find(c); it != r.zones.end()) os << format_number(it->second);
    }
    os << "," << r.flag << "\n";
  }
  return os.str();
}

std::string SpectralTable::slopes_jsonl() const {
  std::ostringstream os;
  for (const auto& s : slopes) {
    nlohmann::ordered_json j;
    j["K"] = s.K;
    j["slope"] = s.slope;
    j["increment"] = s.increment;
    j["points"] = s.points;
    os << j.dump() << "\n";
  }
  return os.str();
}

SpectralTable convergence_study(const Operator& op, double tau, const std::vector<double>& hs, const EpsLaw& eps,
                                const std::vector<int>& Ks, const StudyControls& ctl) {
  if (hs.size() < 3) throw ConfigError("convergence_study: need at least 3 values of h");
  if (Ks.empty()) throw ConfigError("convergence_study: empty K list");
  for (double h : hs)
    if (!(h > 0)) throw ConfigError("convergence_study: h values must be positive");

  struct Ref {
    double value = 0.0;
    std::string flag;
  };
  std::vector<Ref> refs(hs.size());
  parallel_for(hs.size(), ctl.threads, [&](std::size_t i) {
    try {
      OracleControls oc = ctl.oracle;
      oc.threads = 1;
      refs[i].value = BlochOracle(op, hs[i], eps(hs[i]), tau, oc).ids(tau);
    } catch (const Error& e) {
      const std::string msg = e.what();
      refs[i].flag = msg.rfind("oracle", 0) == 0 ? msg : "oracle: " + msg;
    }
  });

  SpectralTable table;
  for (std::size_t i = 0; i < hs.size(); ++i)
    for (int K : Ks) {
      SpectralRow r;
      r.h = hs[i];
      r.eps = eps(hs[i]);
      r.tau = tau;
      r.K = K;
      table.rows.push_back(r);
    }
  parallel_for(table.rows.size(), ctl.threads, [&](std::size_t j) {
    SpectralRow& r = table.rows[j];
    const Ref& ref = refs[j / Ks.size()];
    r.n_oracle = ref.value;
    if (!ref.flag.empty()) {
      r.flagged = true;
      r.flag = ref.flag;
    }
    try {
      PipelineControls pc = ctl.pipeline;
      pc.K = r.K;
      pc.threads = 1;
      const IdsResult res = ctl.params ? ids_pipeline(op, r.eps, r.h, tau, ctl.params(op, r.eps, r.h, r.K), pc)
                                       : ids_pipeline(op, r.eps, r.h, tau, pc);
      r.n_pipeline = res.value;
      for (const auto& z : res.zones) r.zones[z.zone] = z.value;
      if (!res.converged && r.flag.empty()) r.flag = "gauge remainder above target";
    } catch (const Error& e) {
      r.flagged = true;
      r.flag = std::string("pipeline: ") + e.what();
    }
    r.abs_err = std::abs(r.n_pipeline - r.n_oracle);
  });
  for (auto& r : table.rows) std::replace(r.flag.begin(), r.flag.end(), ',', ';');

  double prev = 0.0;
  bool have_prev = false;
  for (int K : Ks) {
    std::vector<double> x, y;
    for (const auto& r : table.rows)
      if (r.K == K && !r.flagged && r.abs_err > 0) {
        x.push_back(r.h);
        y.push_back(r.abs_err);
      }
    SlopeRecord s;
    s.K = K;
    s.points = static_cast<int>(x.size());
    s.slope = x.size() >= 2 ? loglog_slope(x, y) : std::nan("");
    s.increment = have_prev ? s.slope - prev : 0.0;
    prev = s.slope;
    have_prev = true;
    table.slopes.push_back(s);
  }
  return table;
}

}  // namespace apgauge
