#pragma once

#include "apgauge/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace apgauge {

namespace detail {
class Node;
}

// Memo table for one top-level evaluation. Composition only ever asks for a
// coefficient at the query point plus half-lattice shifts of it, so points are
// keyed on a 1e-11 absolute grid: roundoff-level differences in how a shifted
// argument was accumulated collapse onto one entry.
class EvalContext {
 public:
  std::optional<cplx> lookup(const detail::Node* node, const Vec& xi) const;
  void store(const detail::Node* node, const Vec& xi, cplx value);
  std::size_t size() const { return cache_.size(); }

 private:
  struct Key {
    const detail::Node* node;
    long long q[3];
    bool operator==(const Key& o) const {
      return node == o.node && q[0] == o.q[0] && q[1] == o.q[1] && q[2] == o.q[2];
    }
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const;
  };
  static Key make_key(const detail::Node* node, const Vec& xi);
  std::unordered_map<Key, cplx, KeyHash> cache_;
};

struct Monomial {
  cplx coeff;
  std::vector<int> powers;  // one exponent per xi component
};

// A pure evaluator xi -> C. Values are immutable handles onto a shared
// expression DAG; every operation returns a new handle.
class CoefficientFn {
 public:
  CoefficientFn() = default;  // identically zero

  static CoefficientFn constant(cplx c);
  static CoefficientFn polynomial(std::vector<Monomial> terms);
  // scale * exp(-a |xi|^2)
  static CoefficientFn gaussian(double a, cplx scale = 1.0);
  // scale * (1 + |xi|^2)^(-s)
  static CoefficientFn reciprocal_power(double s, cplx scale = 1.0);
  static CoefficientFn real_function(std::function<double(const Vec&)> f, std::string label);

  cplx operator()(const Vec& xi) const;
  cplx evaluate(const Vec& xi, EvalContext& ctx) const;

  // xi -> f(xi + v)
  CoefficientFn shifted(const Vec& v) const;
  CoefficientFn scaled(cplx s) const;
  CoefficientFn conjugated() const;

  static CoefficientFn sum(const std::vector<CoefficientFn>& terms);
  friend CoefficientFn operator+(const CoefficientFn& a, const CoefficientFn& b);
  friend CoefficientFn operator-(const CoefficientFn& a, const CoefficientFn& b);
  friend CoefficientFn operator*(const CoefficientFn& a, const CoefficientFn& b);
  friend CoefficientFn operator/(const CoefficientFn& a, const CoefficientFn& b);

  bool is_zero() const { return node_ == nullptr; }
  std::optional<cplx> constant_value() const;
  std::string describe() const;
  std::size_t node_count() const;
  // Handle identity: equal for copies of the same value.
  const void* identity() const { return node_.get(); }

 private:
  explicit CoefficientFn(std::shared_ptr<const detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const detail::Node> node_;
};

}  // namespace apgauge
