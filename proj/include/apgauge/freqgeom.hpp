#pragma once

#include "apgauge/frequency.hpp"

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace apgauge {

struct TruncationResult {
  ModulePtr module;
  double omega = 0.0;
  int L = 0;
  std::size_t dropped = 0;
  // Declared-decay tail bound on the discarded part, when decay is declared.
  std::optional<double> tail_bound;
  double target = 0.0;  // omega^-L
  std::vector<std::string> warnings;
};

// Keeps frequencies with |theta| <= omega.
TruncationResult truncate(const FrequencyModule& module, double omega, int L);

// K-fold algebraic sum of the module's frequency list.
class SumsetK {
 public:
  int K = 0;
  std::vector<Coords> elements;  // sorted, contains 0, symmetric

  bool contains(const Coords& c) const { return parent_.count(c) > 0; }
  std::vector<Coords> nonzero() const;
  // Nonzero summands from the base list adding up to c (at most K of them).
  std::vector<Coords> decomposition(const Coords& c) const;

 private:
  friend SumsetK sumset(const FrequencyModule&, int, std::size_t);
  // element -> (element of the previous stage, base frequency)
  std::unordered_map<Coords, std::pair<Coords, Coords>, CoordsHash> parent_;
};

inline constexpr std::size_t kDefaultSumsetCap = 500000;
SumsetK sumset(const FrequencyModule& module, int K, std::size_t cap = kDefaultSumsetCap);

// Exact {a + b}.
std::vector<Coords> minkowski_sum(const std::vector<Coords>& a, const std::vector<Coords>& b);

struct QuasiLatticeSubspace {
  std::vector<Coords> basis;
  Eigen::MatrixXd Q;  // d x q, orthonormal columns

  int dim() const { return static_cast<int>(Q.cols()); }
  int ambient() const { return static_cast<int>(Q.rows()); }
  Eigen::MatrixXd projector() const { return Q * Q.transpose(); }
  double distance(const Vec& v) const;
  bool contains(const Vec& v, double tol = 1e-9) const;
};

// Span of the given frequencies; throws ConfigError if they are dependent
// (numeric rank at 1e-9).
QuasiLatticeSubspace make_subspace(const FrequencyModule& module, const std::vector<Coords>& basis);

// sin of the angle between V (-) W and U (-) W, W = V cap U. Zero iff one
// contains the other.
double subspace_angle(const QuasiLatticeSubspace& V, const QuasiLatticeSubspace& U);

inline constexpr std::size_t kDefaultSubspaceCap = 100000;

// All spans of at most d-1 independent nonzero elements, deduplicated.
std::vector<QuasiLatticeSubspace> enumerate_subspaces(const FrequencyModule& module, const SumsetK& set,
                                                      std::size_t cap = kDefaultSubspaceCap);

struct ExtremalWitness {
  double value = 1.0;
  bool vacuous = false;
  std::vector<Coords> witness;
};

ExtremalWitness s_min(const FrequencyModule& module, const SumsetK& set, std::size_t cap = kDefaultSubspaceCap);
// O(n^2) reference over all strongly distinct pairs.
ExtremalWitness s_min_pairwise(const FrequencyModule& module, const SumsetK& set,
                               std::size_t cap = kDefaultSubspaceCap);
ExtremalWitness r_min(const FrequencyModule& module, const SumsetK& set);

struct ResonanceLattice {
  QuasiLatticeSubspace subspace;
  std::vector<Coords> basis;  // Hermite normal form
  double covolume = 0.0;
};

ResonanceLattice lattice_in_subspace(const FrequencyModule& module, const std::vector<Coords>& elements,
                                     const QuasiLatticeSubspace& V);
ResonanceLattice lattice_in_subspace(const FrequencyModule& module, const SumsetK& set,
                                     const QuasiLatticeSubspace& V);

double covolume(const FrequencyModule& module, const std::vector<Coords>& basis);

enum class ConditionStatus { Pass, Fail, NotCheckable };
const char* status_name(ConditionStatus s);

struct ConditionRecord {
  std::string condition;  // "A".."D"
  ConditionStatus status = ConditionStatus::Pass;
  std::vector<Coords> witness;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // required bound
  std::vector<std::string> notes;
};

struct ConditionThresholds {
  // Negative means omega^-1.
  double angle = -1.0;
  double norm = -1.0;
  double covolume = -1.0;
  std::size_t tuple_cap = 2000000;
  std::size_t subspace_cap = kDefaultSubspaceCap;
  std::size_t sumset_cap = kDefaultSumsetCap;
};

struct ConditionReport {
  double omega = 0.0;
  int L = 0;
  int K = 0;
  std::vector<ConditionRecord> records;
  std::vector<std::string> notes;

  bool all_pass() const;
  const ConditionRecord& get(const std::string& name) const;
};

ConditionReport check_conditions(const FrequencyModule& module, int K, double omega, int L,
                                 const ConditionThresholds& thresholds = {});

}  // namespace apgauge
