#include "apgauge/coefficient.hpp"

#include "apgauge/errors.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

namespace apgauge {
namespace detail {

class Node {
 public:
  virtual ~Node() = default;
  virtual cplx eval(const Vec& xi, EvalContext& ctx) const = 0;
  virtual std::optional<cplx> constant_value() const { return std::nullopt; }
  virtual std::string describe() const = 0;
  virtual void children(std::vector<const Node*>&) const {}
};

namespace {

class ConstantNode final : public Node {
 public:
  explicit ConstantNode(cplx c) : c_(c) {}
  cplx eval(const Vec&, EvalContext&) const override { return c_; }
  std::optional<cplx> constant_value() const override { return c_; }
  std::string describe() const override {
    std::ostringstream os;
    os << "(" << c_.real() << (c_.imag() < 0 ? "" : "+") << c_.imag() << "i)";
    return os.str();
  }

 private:
  cplx c_;
};

class PolynomialNode final : public Node {
 public:
  explicit PolynomialNode(std::vector<Monomial> terms) : terms_(std::move(terms)) {}
  cplx eval(const Vec& xi, EvalContext&) const override {
    cplx acc = 0.0;
    for (const auto& m : terms_) {
      double p = 1.0;
      for (std::size_t i = 0; i < m.powers.size(); ++i) p *= std::pow(xi[static_cast<Eigen::Index>(i)], m.powers[i]);
      acc += m.coeff * p;
    }
    return acc;
  }
  std::string describe() const override { return "poly[" + std::to_string(terms_.size()) + "]"; }

 private:
  std::vector<Monomial> terms_;
};

class GaussianNode final : public Node {
 public:
  GaussianNode(double a, cplx scale) : a_(a), scale_(scale) {}
  cplx eval(const Vec& xi, EvalContext&) const override {
    return scale_ * std::exp(-a_ * xi.squaredNorm());
  }
  std::string describe() const override { return "gauss(" + std::to_string(a_) + ")"; }

 private:
  double a_;
  cplx scale_;
};

class ReciprocalNode final : public Node {
 public:
  ReciprocalNode(double s, cplx scale) : s_(s), scale_(scale) {}
  cplx eval(const Vec& xi, EvalContext&) const override {
    return scale_ * std::pow(1.0 + xi.squaredNorm(), -s_);
  }
  std::string describe() const override { return "recip(" + std::to_string(s_) + ")"; }

 private:
  double s_;
  cplx scale_;
};

class RealFunctionNode final : public Node {
 public:
  RealFunctionNode(std::function<double(const Vec&)> f, std::string label)
      : f_(std::move(f)), label_(std::move(label)) {}
  cplx eval(const Vec& xi, EvalContext&) const override { return f_(xi); }
  std::string describe() const override { return label_; }

 private:
  std::function<double(const Vec&)> f_;
  std::string label_;
};

class SumNode final : public Node {
 public:
  explicit SumNode(std::vector<std::shared_ptr<const Node>> terms) : terms_(std::move(terms)) {}
  cplx eval(const Vec& xi, EvalContext& ctx) const override {
    if (auto hit = ctx.lookup(this, xi)) return *hit;
    cplx acc = 0.0;
    for (const auto& t : terms_) acc += t->eval(xi, ctx);
    ctx.store(this, xi, acc);
    return acc;
  }
  std::string describe() const override {
    std::string s = "sum(";
    for (std::size_t i = 0; i < terms_.size(); ++i) s += (i ? "," : "") + terms_[i]->describe();
    return s + ")";
  }
  void children(std::vector<const Node*>& out) const override {
    for (const auto& t : terms_) out.push_back(t.get());
  }

 private:
  std::vector<std::shared_ptr<const Node>> terms_;
};

class ProductNode final : public Node {
 public:
  ProductNode(std::shared_ptr<const Node> a, std::shared_ptr<const Node> b) : a_(std::move(a)), b_(std::move(b)) {}
  cplx eval(const Vec& xi, EvalContext& ctx) const override { return a_->eval(xi, ctx) * b_->eval(xi, ctx); }
  std::string describe() const override { return a_->describe() + "*" + b_->describe(); }
  void children(std::vector<const Node*>& out) const override {
    out.push_back(a_.get());
    out.push_back(b_.get());
  }

 private:
  std::shared_ptr<const Node> a_, b_;
};

class QuotientNode final : public Node {
 public:
  QuotientNode(std::shared_ptr<const Node> a, std::shared_ptr<const Node> b) : a_(std::move(a)), b_(std::move(b)) {}
  cplx eval(const Vec& xi, EvalContext& ctx) const override {
    if (auto hit = ctx.lookup(this, xi)) return *hit;
    const cplx v = a_->eval(xi, ctx) / b_->eval(xi, ctx);
    ctx.store(this, xi, v);
    return v;
  }
  std::string describe() const override { return "(" + a_->describe() + ")/(" + b_->describe() + ")"; }
  void children(std::vector<const Node*>& out) const override {
    out.push_back(a_.get());
    out.push_back(b_.get());
  }

 private:
  std::shared_ptr<const Node> a_, b_;
};

class ShiftNode final : public Node {
 public:
  ShiftNode(std::shared_ptr<const Node> child, Vec v) : child_(std::move(child)), v_(std::move(v)) {}
  cplx eval(const Vec& xi, EvalContext& ctx) const override {
    const Vec p = xi + v_;
    return child_->eval(p, ctx);
  }
  std::string describe() const override { return "shift(" + child_->describe() + ")"; }
  void children(std::vector<const Node*>& out) const override { out.push_back(child_.get()); }
  const std::shared_ptr<const Node>& child() const { return child_; }
  const Vec& offset() const { return v_; }

 private:
  std::shared_ptr<const Node> child_;
  Vec v_;
};

class ScaleNode final : public Node {
 public:
  ScaleNode(std::shared_ptr<const Node> child, cplx s) : child_(std::move(child)), s_(s) {}
  cplx eval(const Vec& xi, EvalContext& ctx) const override { return s_ * child_->eval(xi, ctx); }
  std::string describe() const override { return "scale(" + child_->describe() + ")"; }
  void children(std::vector<const Node*>& out) const override { out.push_back(child_.get()); }
  const std::shared_ptr<const Node>& child() const { return child_; }
  cplx factor() const { return s_; }

 private:
  std::shared_ptr<const Node> child_;
  cplx s_;
};

class ConjNode final : public Node {
 public:
  explicit ConjNode(std::shared_ptr<const Node> child) : child_(std::move(child)) {}
  cplx eval(const Vec& xi, EvalContext& ctx) const override { return std::conj(child_->eval(xi, ctx)); }
  std::string describe() const override { return "conj(" + child_->describe() + ")"; }
  void children(std::vector<const Node*>& out) const override { out.push_back(child_.get()); }

 private:
  std::shared_ptr<const Node> child_;
};

}  // namespace
}  // namespace detail

// ---------------------------------------------------------------------------

std::size_t EvalContext::KeyHash::operator()(const Key& k) const {
  std::size_t h = std::hash<const void*>{}(k.node);
  for (long long q : k.q) h ^= std::hash<long long>{}(q) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

EvalContext::Key EvalContext::make_key(const detail::Node* node, const Vec& xi) {
  constexpr double kQuantum = 1e-11;
  constexpr double kLimit = 9e18 * kQuantum;
  Key k{node, {0, 0, 0}};
  for (Eigen::Index i = 0; i < xi.size() && i < 3; ++i) {
    const double v = std::clamp(xi[i], -kLimit, kLimit);
    k.q[i] = std::llround(v / kQuantum);
  }
  return k;
}

std::optional<cplx> EvalContext::lookup(const detail::Node* node, const Vec& xi) const {
  auto it = cache_.find(make_key(node, xi));
  if (it == cache_.end()) return std::nullopt;
  return it->second;
}

void EvalContext::store(const detail::Node* node, const Vec& xi, cplx value) {
  cache_.emplace(make_key(node, xi), value);
}

// ---------------------------------------------------------------------------

CoefficientFn CoefficientFn::constant(cplx c) {
  if (c == cplx(0.0)) return {};
  return CoefficientFn(std::make_shared<detail::ConstantNode>(c));
}

CoefficientFn CoefficientFn::polynomial(std::vector<Monomial> terms) {
  std::erase_if(terms, [](const Monomial& m) { return m.coeff == cplx(0.0); });
  if (terms.empty()) return {};
  return CoefficientFn(std::make_shared<detail::PolynomialNode>(std::move(terms)));
}

CoefficientFn CoefficientFn::gaussian(double a, cplx scale) {
  if (scale == cplx(0.0)) return {};
  if (a < 0) throw ConfigError("gaussian coefficient needs a >= 0");
  return CoefficientFn(std::make_shared<detail::GaussianNode>(a, scale));
}

CoefficientFn CoefficientFn::reciprocal_power(double s, cplx scale) {
  if (scale == cplx(0.0)) return {};
  return CoefficientFn(std::make_shared<detail::ReciprocalNode>(s, scale));
}

CoefficientFn CoefficientFn::real_function(std::function<double(const Vec&)> f, std::string label) {
  return CoefficientFn(std::make_shared<detail::RealFunctionNode>(std::move(f), std::move(label)));
}

cplx CoefficientFn::operator()(const Vec& xi) const {
  if (!node_) return 0.0;
  EvalContext ctx;
  return node_->eval(xi, ctx);
}

cplx CoefficientFn::evaluate(const Vec& xi, EvalContext& ctx) const {
  if (!node_) return 0.0;
  return node_->eval(xi, ctx);
}

CoefficientFn CoefficientFn::shifted(const Vec& v) const {
  if (!node_ || node_->constant_value() || v.isZero(0.0)) return *this;
  if (auto* s = dynamic_cast<const detail::ShiftNode*>(node_.get())) {
    const Vec total = s->offset() + v;
    if (total.isZero(0.0)) return CoefficientFn(s->child());
    return CoefficientFn(std::make_shared<detail::ShiftNode>(s->child(), total));
  }
  return CoefficientFn(std::make_shared<detail::ShiftNode>(node_, v));
}

CoefficientFn CoefficientFn::scaled(cplx s) const {
  if (!node_ || s == cplx(0.0)) return {};
  if (s == cplx(1.0)) return *this;
  if (auto c = node_->constant_value()) return constant(*c * s);
  if (auto* sc = dynamic_cast<const detail::ScaleNode*>(node_.get()))
    return CoefficientFn(sc->child()).scaled(sc->factor() * s);
  return CoefficientFn(std::make_shared<detail::ScaleNode>(node_, s));
}

CoefficientFn CoefficientFn::conjugated() const {
  if (!node_) return {};
  if (auto c = node_->constant_value()) return constant(std::conj(*c));
  return CoefficientFn(std::make_shared<detail::ConjNode>(node_));
}

CoefficientFn CoefficientFn::sum(const std::vector<CoefficientFn>& terms) {
  std::vector<std::shared_ptr<const detail::Node>> kept;
  cplx folded = 0.0;
  for (const auto& t : terms) {
    if (!t.node_) continue;
    if (auto c = t.node_->constant_value()) {
      folded += *c;
      continue;
    }
    kept.push_back(t.node_);
  }
  if (folded != cplx(0.0)) kept.push_back(std::make_shared<detail::ConstantNode>(folded));
  if (kept.empty()) return {};
  if (kept.size() == 1) return CoefficientFn(kept.front());
  return CoefficientFn(std::make_shared<detail::SumNode>(std::move(kept)));
}

CoefficientFn operator+(const CoefficientFn& a, const CoefficientFn& b) { return CoefficientFn::sum({a, b}); }

CoefficientFn operator-(const CoefficientFn& a, const CoefficientFn& b) {
  return CoefficientFn::sum({a, b.scaled(-1.0)});
}

CoefficientFn operator*(const CoefficientFn& a, const CoefficientFn& b) {
  if (!a.node_ || !b.node_) return {};
  if (auto c = a.node_->constant_value()) return b.scaled(*c);
  if (auto c = b.node_->constant_value()) return a.scaled(*c);
  return CoefficientFn(std::make_shared<detail::ProductNode>(a.node_, b.node_));
}

CoefficientFn operator/(const CoefficientFn& a, const CoefficientFn& b) {
  if (!b.node_) throw NumericalError("division by an identically zero coefficient");
  if (!a.node_) return {};
  if (auto c = b.node_->constant_value()) return a.scaled(1.0 / *c);
  return CoefficientFn(std::make_shared<detail::QuotientNode>(a.node_, b.node_));
}

std::optional<cplx> CoefficientFn::constant_value() const {
  if (!node_) return cplx(0.0);
  return node_->constant_value();
}

std::string CoefficientFn::describe() const { return node_ ? node_->describe() : "0"; }

std::size_t CoefficientFn::node_count() const {
  if (!node_) return 0;
  std::unordered_set<const detail::Node*> seen;
  std::vector<const detail::Node*> stack{node_.get()};
  while (!stack.empty()) {
    const detail::Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    n->children(stack);
  }
  return seen.size();
}

}  // namespace apgauge
