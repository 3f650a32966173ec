#pragma once

#include "apgauge/types.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace apgauge {

// |b_theta| <= C (1 + |theta|)^(-rho); the frequency count in a ball of
// radius R grows like R^growth.
struct DecayDecl {
  double C = 1.0;
  double rho = 0.0;
  double growth = 1.0;
};

class FrequencyModule;

struct Frequency {
  Coords coords;
  Vec embedding;

  bool operator==(const Frequency& o) const { return coords == o.coords; }
  bool operator<(const Frequency& o) const { return coords < o.coords; }
};

struct CoordsHash {
  std::size_t operator()(const Coords& c) const;
};

// Frequencies are integer coordinate vectors against a fixed real generator
// matrix G (d x r). The stored list always contains 0 and is symmetric.
class FrequencyModule {
 public:
  FrequencyModule(Eigen::MatrixXd generators, std::vector<Coords> frequencies,
                  std::optional<DecayDecl> decay = std::nullopt, bool infinite = false);

  // Z^d with generators I and frequency list {0, +-e_i}.
  static std::shared_ptr<const FrequencyModule> integer_lattice(int d);

  int dimension() const { return static_cast<int>(G_.rows()); }
  int rank() const { return static_cast<int>(G_.cols()); }
  const Eigen::MatrixXd& generators() const { return G_; }
  const std::vector<Coords>& frequencies() const { return freqs_; }
  const std::optional<DecayDecl>& decay() const { return decay_; }
  bool declared_infinite() const { return infinite_; }

  Vec embed(const Coords& c) const;
  Frequency frequency(const Coords& c) const;
  Coords zero() const { return Coords(static_cast<std::size_t>(rank()), 0); }
  bool spans() const;
  bool same_generators(const FrequencyModule& o) const;
  // Embedded generators are linearly independent over R, so Z^r -> R^d is
  // injective and the group generated is a lattice.
  bool generators_independent() const;

  std::shared_ptr<const FrequencyModule> with_frequencies(std::vector<Coords> f) const;

 private:
  Eigen::MatrixXd G_;
  std::vector<Coords> freqs_;
  std::optional<DecayDecl> decay_;
  bool infinite_;
};

using ModulePtr = std::shared_ptr<const FrequencyModule>;

std::string coords_string(const Coords& c);

}  // namespace apgauge
