#include "apgauge/frequency.hpp"

#include "apgauge/errors.hpp"

#include <algorithm>
#include <set>

namespace apgauge {

std::size_t CoordsHash::operator()(const Coords& c) const {
  std::size_t h = 1469598103934665603ULL;
  for (long long v : c) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ULL;
  return h;
}

FrequencyModule::FrequencyModule(Eigen::MatrixXd generators, std::vector<Coords> frequencies,
                                 std::optional<DecayDecl> decay, bool infinite)
    : G_(std::move(generators)), decay_(decay), infinite_(infinite) {
  if (G_.rows() < 1 || G_.rows() > 3) throw ConfigError("frequency module dimension must be 1..3");
  if (G_.cols() < 1) throw ConfigError("frequency module needs at least one generator");
  if (!G_.allFinite()) throw ConfigError("generator matrix has non-finite entries");
  const auto r = static_cast<std::size_t>(G_.cols());
  std::set<Coords> all;
  all.insert(Coords(r, 0));
  for (const Coords& c : frequencies) {
    if (c.size() != r)
      throw ConfigError("frequency " + coords_string(c) + " has " + std::to_string(c.size()) +
                        " coordinates, module rank is " + std::to_string(r));
    all.insert(c);
    all.insert(-c);
  }
  freqs_.assign(all.begin(), all.end());
  if (decay_ && !(decay_->rho > decay_->growth))
    throw ConfigError("decay rate rho must exceed the growth exponent for a finite tail");
}

std::shared_ptr<const FrequencyModule> FrequencyModule::integer_lattice(int d) {
  std::vector<Coords> f;
  for (int i = 0; i < d; ++i) {
    Coords c(static_cast<std::size_t>(d), 0);
    c[static_cast<std::size_t>(i)] = 1;
    f.push_back(c);
  }
  return std::make_shared<FrequencyModule>(Eigen::MatrixXd::Identity(d, d), f);
}

Vec FrequencyModule::embed(const Coords& c) const {
  Vec v = Vec::Zero(G_.rows());
  // Fixed summation order keeps the embedding reproducible from coords.
  for (Eigen::Index j = 0; j < G_.cols(); ++j) {
    const double cj = static_cast<double>(c[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < G_.rows(); ++i) v[i] += G_(i, j) * cj;
  }
  return v;
}

Frequency FrequencyModule::frequency(const Coords& c) const {
  if (c.size() != static_cast<std::size_t>(rank())) throw ConfigError("coordinate length mismatch");
  return Frequency{c, embed(c)};
}

bool FrequencyModule::spans() const {
  Eigen::MatrixXd E(dimension(), static_cast<Eigen::Index>(freqs_.size()));
  for (std::size_t k = 0; k < freqs_.size(); ++k) E.col(static_cast<Eigen::Index>(k)) = embed(freqs_[k]);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(E);
  const double smax = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  if (smax == 0.0) return false;
  int rk = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-9 * smax) ++rk;
  return rk == dimension();
}

bool FrequencyModule::same_generators(const FrequencyModule& o) const {
  return G_.rows() == o.G_.rows() && G_.cols() == o.G_.cols() && G_ == o.G_;
}

bool FrequencyModule::generators_independent() const {
  if (rank() > dimension()) return false;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(G_);
  const auto& s = svd.singularValues();
  return s[s.size() - 1] > 1e-9 * s[0];
}

std::shared_ptr<const FrequencyModule> FrequencyModule::with_frequencies(std::vector<Coords> f) const {
  return std::make_shared<FrequencyModule>(G_, std::move(f), decay_, infinite_);
}

std::string coords_string(const Coords& c) {
  std::string s = "(";
  for (std::size_t i = 0; i < c.size(); ++i) s += (i ? "," : "") + std::to_string(c[i]);
  return s + ")";
}

}  // namespace apgauge
