#include "apgauge/freqgeom.hpp"

#include "apgauge/errors.hpp"
#include "apgauge/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

namespace apgauge {

TruncationResult truncate(const FrequencyModule& module, double omega, int L) {
  if (!(omega > 0)) throw ConfigError("truncate: omega must be positive");
  TruncationResult res;
  res.omega = omega;
  res.L = L;
  res.target = std::pow(omega, -L);
  std::vector<Coords> kept;
  for (const Coords& c : module.frequencies()) {
    if (module.embed(c).norm() <= omega * (1 + 1e-12))
      kept.push_back(c);
    else
      ++res.dropped;
  }
  res.module = module.with_frequencies(kept);
  if (res.module->frequencies().size() == 1)
    res.warnings.push_back("degenerate truncation: no nonzero frequency has |theta| <= " + std::to_string(omega));
  if (const auto& dec = module.decay()) {
    // sum_{|theta| > omega} C (1+|theta|)^-rho <= int_omega^inf C r^-rho d(r^p)
    res.tail_bound = dec->C * dec->growth * std::pow(omega, dec->growth - dec->rho) / (dec->rho - dec->growth);
  }
  return res;
}

// ---------------------------------------------------------------------------

std::vector<Coords> SumsetK::nonzero() const {
  std::vector<Coords> out;
  for (const auto& c : elements)
    if (!is_zero(c)) out.push_back(c);
  return out;
}

std::vector<Coords> SumsetK::decomposition(const Coords& c) const {
  std::vector<Coords> parts;
  Coords cur = c;
  while (!is_zero(cur)) {
    auto it = parent_.find(cur);
    if (it == parent_.end()) throw ConfigError("decomposition: " + coords_string(c) + " not in sumset");
    parts.push_back(it->second.second);
    cur = it->second.first;
  }
  return parts;
}

SumsetK sumset(const FrequencyModule& module, int K, std::size_t cap) {
  if (K < 1) throw ConfigError("sumset: K must be >= 1");
  SumsetK out;
  out.K = K;
  const auto& base = module.frequencies();
  const Coords zero = module.zero();
  out.parent_.emplace(zero, std::make_pair(zero, zero));
  std::vector<Coords> frontier;
  for (const Coords& c : base) {
    if (is_zero(c)) continue;
    out.parent_.emplace(c, std::make_pair(zero, c));
    frontier.push_back(c);
  }
  for (int k = 2; k <= K && !frontier.empty(); ++k) {
    std::vector<Coords> next;
    for (const Coords& a : frontier) {
      for (const Coords& b : base) {
        if (is_zero(b)) continue;
        Coords s = a + b;
        if (out.parent_.count(s)) continue;
        out.parent_.emplace(s, std::make_pair(a, b));
        next.push_back(std::move(s));
        if (out.parent_.size() > cap)
          throw ResourceError("sumset: element count exceeds the cap of " + std::to_string(cap));
      }
    }
    frontier = std::move(next);
  }
  for (const auto& [c, p] : out.parent_) out.elements.push_back(c);
  std::sort(out.elements.begin(), out.elements.end());
  return out;
}

std::vector<Coords> minkowski_sum(const std::vector<Coords>& a, const std::vector<Coords>& b) {
  std::set<Coords> s;
  for (const auto& x : a)
    for (const auto& y : b) s.insert(x + y);
  return {s.begin(), s.end()};
}

// ---------------------------------------------------------------------------

double QuasiLatticeSubspace::distance(const Vec& v) const {
  const Eigen::VectorXd x = v;
  return (x - Q * (Q.transpose() * x)).norm();
}

bool QuasiLatticeSubspace::contains(const Vec& v, double tol) const {
  return distance(v) <= tol * std::max(1.0, v.norm());
}

namespace {

Eigen::MatrixXd embedded_columns(const FrequencyModule& module, const std::vector<Coords>& cs) {
  Eigen::MatrixXd E(module.dimension(), static_cast<Eigen::Index>(cs.size()));
  for (std::size_t k = 0; k < cs.size(); ++k) E.col(static_cast<Eigen::Index>(k)) = module.embed(cs[k]);
  return E;
}

int numeric_rank(const Eigen::MatrixXd& E, double tol = 1e-9) {
  if (E.cols() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(E);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int rk = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol * s[0]) ++rk;
  return rk;
}

std::vector<long long> projector_key(const Eigen::MatrixXd& P) {
  std::vector<long long> key;
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = i; j < P.cols(); ++j) key.push_back(std::llround(P(i, j) * 1e7));
  return key;
}

Coords positive_representative(const Coords& c) {
  const Coords m = -c;
  return c < m ? m : c;
}

}  // namespace

QuasiLatticeSubspace make_subspace(const FrequencyModule& module, const std::vector<Coords>& basis) {
  if (basis.empty()) throw ConfigError("make_subspace: empty basis");
  const Eigen::MatrixXd E = embedded_columns(module, basis);
  if (numeric_rank(E) != static_cast<int>(basis.size()))
    throw ConfigError("make_subspace: basis vectors are linearly dependent");
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(E);
  QuasiLatticeSubspace V;
  V.basis = basis;
  V.Q = qr.householderQ() * Eigen::MatrixXd::Identity(E.rows(), E.cols());
  return V;
}

double subspace_angle(const QuasiLatticeSubspace& V, const QuasiLatticeSubspace& U) {
  const Eigen::MatrixXd R = U.Q - V.Q * (V.Q.transpose() * U.Q);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(R);
  Eigen::VectorXd s = svd.singularValues();
  std::sort(s.data(), s.data() + s.size());
  const int m = std::min(V.dim(), U.dim());
  for (int i = 0; i < m; ++i)
    if (s[i] >= 1e-9) return std::min(1.0, s[i]);
  return 0.0;
}

std::vector<QuasiLatticeSubspace> enumerate_subspaces(const FrequencyModule& module, const SumsetK& set,
                                                      std::size_t cap) {
  const int d = module.dimension();
  std::vector<Coords> reps;
  {
    std::set<Coords> r;
    for (const auto& c : set.nonzero()) r.insert(positive_representative(c));
    reps.assign(r.begin(), r.end());
  }
  std::map<std::vector<long long>, QuasiLatticeSubspace> found;
  auto consider = [&](const std::vector<Coords>& basis) {
    const Eigen::MatrixXd E = embedded_columns(module, basis);
    if (numeric_rank(E) != static_cast<int>(basis.size())) return;
    QuasiLatticeSubspace V = make_subspace(module, basis);
    auto key = projector_key(V.projector());
    key.insert(key.begin(), V.dim());
    if (found.emplace(std::move(key), std::move(V)).second && found.size() > cap)
      throw ResourceError("subspace enumeration exceeds the cap of " + std::to_string(cap));
  };
  if (d >= 2)
    for (const auto& a : reps) consider({a});
  if (d >= 3)
    for (std::size_t i = 0; i < reps.size(); ++i)
      for (std::size_t j = i + 1; j < reps.size(); ++j) consider({reps[i], reps[j]});
  std::vector<QuasiLatticeSubspace> out;
  out.reserve(found.size());
  for (auto& [k, V] : found) out.push_back(std::move(V));
  return out;
}

ExtremalWitness s_min_pairwise(const FrequencyModule& module, const SumsetK& set, std::size_t cap) {
  const auto subs = enumerate_subspaces(module, set, cap);
  ExtremalWitness w;
  w.vacuous = true;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    for (std::size_t j = i + 1; j < subs.size(); ++j) {
      const double s = subspace_angle(subs[i], subs[j]);
      if (s == 0.0) continue;
      if (w.vacuous || s < w.value) {
        w.vacuous = false;
        w.value = s;
        w.witness = subs[i].basis;
        w.witness.insert(w.witness.end(), subs[j].basis.begin(), subs[j].basis.end());
      }
    }
  }
  if (w.vacuous) w.value = 1.0;
  return w;
}

ExtremalWitness s_min(const FrequencyModule& module, const SumsetK& set, std::size_t cap) {
  if (module.dimension() != 2) return s_min_pairwise(module, set, cap);
  // Lines in the plane: the closest pair is adjacent in angle order mod pi.
  const auto subs = enumerate_subspaces(module, set, cap);
  ExtremalWitness w;
  if (subs.size() < 2) {
    w.vacuous = true;
    return w;
  }
  std::vector<std::pair<double, std::size_t>> ang;
  for (std::size_t i = 0; i < subs.size(); ++i) {
    double a = std::atan2(subs[i].Q(1, 0), subs[i].Q(0, 0));
    a = std::fmod(a + 2 * kPi, kPi);
    ang.emplace_back(a, i);
  }
  std::sort(ang.begin(), ang.end());
  double best = 2.0;
  std::size_t bi = 0, bj = 0;
  for (std::size_t k = 0; k < ang.size(); ++k) {
    const std::size_t n = (k + 1) % ang.size();
    const double s = subspace_angle(subs[ang[k].second], subs[ang[n].second]);
    if (s > 0.0 && s < best) {
      best = s;
      bi = ang[k].second;
      bj = ang[n].second;
    }
  }
  w.value = std::min(best, 1.0);
  w.witness = subs[bi].basis;
  w.witness.insert(w.witness.end(), subs[bj].basis.begin(), subs[bj].basis.end());
  return w;
}

ExtremalWitness r_min(const FrequencyModule& module, const SumsetK& set) {
  ExtremalWitness w;
  w.vacuous = true;
  for (const auto& c : set.nonzero()) {
    const double n = module.embed(c).norm();
    if (w.vacuous || n < w.value || (n == w.value && c < w.witness.front())) {
      w.vacuous = false;
      w.value = n;
      w.witness = {c};
    }
  }
  if (w.vacuous) w.value = std::numeric_limits<double>::infinity();
  return w;
}

double covolume(const FrequencyModule& module, const std::vector<Coords>& basis) {
  const Eigen::MatrixXd B = embedded_columns(module, basis);
  return std::sqrt(std::max(0.0, (B.transpose() * B).determinant()));
}

ResonanceLattice lattice_in_subspace(const FrequencyModule& module, const std::vector<Coords>& elements,
                                     const QuasiLatticeSubspace& V) {
  std::vector<Coords> members = V.basis;
  for (const auto& c : elements) {
    if (is_zero(c)) continue;
    if (!V.contains(module.embed(c))) continue;
    if (!in_rational_span(V.basis, c))
      throw InconsistencyError("member " + coords_string(c) +
                               " lies in the real span but outside the rational span of the subspace basis");
    members.push_back(c);
  }
  ResonanceLattice L;
  L.subspace = V;
  L.basis = hermite_normal_form(members);
  if (static_cast<int>(L.basis.size()) != V.dim())
    throw InconsistencyError("lattice rank " + std::to_string(L.basis.size()) + " differs from subspace dimension " +
                             std::to_string(V.dim()));
  L.covolume = covolume(module, L.basis);
  return L;
}

ResonanceLattice lattice_in_subspace(const FrequencyModule& module, const SumsetK& set,
                                     const QuasiLatticeSubspace& V) {
  return lattice_in_subspace(module, set.elements, V);
}

// ---------------------------------------------------------------------------

const char* status_name(ConditionStatus s) {
  switch (s) {
    case ConditionStatus::Pass: return "pass";
    case ConditionStatus::Fail: return "fail";
    case ConditionStatus::NotCheckable: return "not-checkable";
  }
  return "?";
}

bool ConditionReport::all_pass() const {
  return std::all_of(records.begin(), records.end(),
                     [](const ConditionRecord& r) { return r.status == ConditionStatus::Pass; });
}

const ConditionRecord& ConditionReport::get(const std::string& name) const {
  for (const auto& r : records)
    if (r.condition == name) return r;
  throw ConfigError("no record for condition " + name);
}

namespace {

ConditionRecord check_A(const FrequencyModule& module, const SumsetK& set, const ConditionThresholds& th) {
  ConditionRecord rec;
  rec.condition = "A";
  const int d = module.dimension();
  std::vector<Coords> reps;
  {
    std::set<Coords> r;
    for (const auto& c : set.nonzero()) r.insert(positive_representative(c));
    reps.assign(r.begin(), r.end());
  }
  const std::size_t n = reps.size();
  double tuples = 1.0;
  for (int i = 0; i < d; ++i) tuples *= static_cast<double>(n - static_cast<std::size_t>(i)) / (i + 1);
  if (tuples > static_cast<double>(th.tuple_cap))
    throw ResourceError("condition A: tuple count exceeds the cap of " + std::to_string(th.tuple_cap));
  std::size_t checked = 0, dependent = 0;
  std::vector<std::size_t> idx(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) idx[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
  bool more = n >= static_cast<std::size_t>(d);
  while (more) {
    std::vector<Coords> tuple;
    for (auto i : idx) tuple.push_back(reps[i]);
    ++checked;
    if (numeric_rank(embedded_columns(module, tuple)) < d) {
      ++dependent;
      if (integer_kernel(tuple).empty()) {
        rec.status = ConditionStatus::Fail;
        rec.witness = tuple;
        rec.notes.push_back("real-dependent tuple with empty integer kernel");
        break;
      }
    }
    int k = d - 1;
    while (k >= 0 && idx[static_cast<std::size_t>(k)] == n - static_cast<std::size_t>(d - k)) --k;
    if (k < 0) {
      more = false;
    } else {
      ++idx[static_cast<std::size_t>(k)];
      for (int j = k + 1; j < d; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  rec.value = static_cast<double>(dependent);
  rec.notes.push_back("tuples checked: " + std::to_string(checked) + ", real-dependent: " + std::to_string(dependent) +
                      ", each with a nonzero integer kernel" + (rec.status == ConditionStatus::Pass ? "" : " (except witness)"));

  // Injectivity evidence: no nonzero coordinate difference embeds to 0.
  double margin = std::numeric_limits<double>::infinity();
  Coords worst;
  const auto diffs = minkowski_sum(set.elements, set.elements);
  for (const auto& c : diffs) {
    if (is_zero(c)) continue;
    const double v = module.embed(c).norm();
    if (v < margin) {
      margin = v;
      worst = c;
    }
  }
  rec.threshold = margin;
  if (!worst.empty()) {
    rec.notes.push_back("min |theta| over nonzero coordinate differences: " + std::to_string(margin) + " at " +
                        coords_string(worst));
    if (margin < 1e-9 && rec.status == ConditionStatus::Pass) {
      rec.status = ConditionStatus::Fail;
      rec.witness = {worst};
      rec.notes.push_back("a nonzero integer combination embeds to 0");
    }
  }
  if (rec.status == ConditionStatus::Pass) {
    if (module.generators_independent())
      rec.notes.push_back("Theta_infinity is a lattice (generators independent over R)");
    else
      rec.notes.push_back("Theta_infinity is not a lattice: " + std::to_string(module.rank()) +
                          " rationally independent generators in dimension " + std::to_string(d));
  }
  return rec;
}

ConditionRecord check_B(const FrequencyModule& module, const TruncationResult& tr) {
  ConditionRecord rec;
  rec.condition = "B";
  rec.threshold = tr.target;
  if (tr.tail_bound) {
    rec.value = *tr.tail_bound;
    rec.status = *tr.tail_bound <= tr.target ? ConditionStatus::Pass : ConditionStatus::Fail;
    rec.notes.push_back("declared-decay tail bound vs omega^-L");
  } else if (!module.declared_infinite() && tr.dropped == 0) {
    rec.value = 0.0;
    rec.notes.push_back("finite frequency set inside the ball: B' = B");
  } else {
    rec.status = ConditionStatus::NotCheckable;
    rec.value = std::numeric_limits<double>::quiet_NaN();
    rec.notes.push_back("no decay declared for the discarded frequencies");
  }
  return rec;
}

}  // namespace

ConditionReport check_conditions(const FrequencyModule& module, int K, double omega, int L,
                                 const ConditionThresholds& th) {
  ConditionReport rep;
  rep.omega = omega;
  rep.L = L;
  rep.K = K;
  const TruncationResult tr = truncate(module, omega, L);
  for (const auto& w : tr.warnings) rep.notes.push_back(w);
  const FrequencyModule& trunc = *tr.module;
  const SumsetK set = sumset(trunc, K, th.sumset_cap);
  const double inv = 1.0 / omega;

  rep.records.push_back(check_A(trunc, set, th));
  rep.records.push_back(check_B(module, tr));

  {
    ConditionRecord rec;
    rec.condition = "C";
    const auto s = s_min(trunc, set, th.subspace_cap);
    const auto r = r_min(trunc, set);
    const double ts = th.angle >= 0 ? th.angle : inv;
    const double tn = th.norm >= 0 ? th.norm : inv;
    rec.threshold = std::max(ts, tn);
    rec.value = std::min(s.value, r.value);
    if (s.vacuous) rec.notes.push_back("no strongly distinct subspace pairs: angle bound vacuous (s_min = 1)");
    rec.notes.push_back("s_min = " + std::to_string(s.value) + ", r_min = " + std::to_string(r.value));
    if (!s.vacuous && s.value < ts) {
      rec.status = ConditionStatus::Fail;
      rec.witness = s.witness;
      rec.value = s.value;
      rec.threshold = ts;
    } else if (r.value < tn) {
      rec.status = ConditionStatus::Fail;
      rec.witness = r.witness;
      rec.value = r.value;
      rec.threshold = tn;
    } else {
      rec.witness = s.vacuous ? r.witness : s.witness;
    }
    rep.records.push_back(std::move(rec));
  }

  {
    ConditionRecord rec;
    rec.condition = "D";
    rec.threshold = th.covolume >= 0 ? th.covolume : inv;
    rec.value = std::numeric_limits<double>::infinity();
    rec.notes.push_back("lattice taken as the Z-span of Theta'_K within each subspace (covolume over-approximated)");
    const auto subs = enumerate_subspaces(trunc, set, th.subspace_cap);
    for (const auto& V : subs) {
      try {
        const auto lat = lattice_in_subspace(trunc, set, V);
        if (lat.covolume < rec.value) {
          rec.value = lat.covolume;
          rec.witness = lat.basis;
        }
      } catch (const InconsistencyError& e) {
        rec.status = ConditionStatus::Fail;
        rec.witness = V.basis;
        rec.notes.push_back(e.what());
        break;
      }
    }
    if (subs.empty()) rec.notes.push_back("no proper nonzero subspaces");
    if (rec.status == ConditionStatus::Pass && rec.value < rec.threshold) rec.status = ConditionStatus::Fail;
    rep.records.push_back(std::move(rec));
  }
  return rep;
}

}  // namespace apgauge
