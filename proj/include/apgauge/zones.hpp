#pragma once

#include "apgauge/base_symbol.hpp"
#include "apgauge/freqgeom.hpp"

#include <optional>
#include <string>
#include <vector>

namespace apgauge {

struct ZoneParams {
  double eps = 0.0;
  double h = 0.1;
  double vartheta = 1.0;
  std::vector<double> delta;  // delta_1 < ... < delta_{max(d-1,1)}
  double varsigma = 0.0;
  double sigma = 0.0;
  double c = 1.0;
  double C0 = 0.0;
  double diameter_factor = 2.0;

  // Zones are sized with max(eps, h): below h the perturbation is already
  // at the uncertainty scale.
  double eps_zone() const { return std::max(eps, h); }
  // gamma_j = c eps^(1/2) h^(-delta_j), j = 1..delta.size()
  double gamma(int j) const;
  // h^(1 - varsigma)
  double shell_scale() const;
  // C0 eps + h^(1 - varsigma)
  double shell_width() const;

  // delta_j = vartheta/(6K) j, varsigma = delta_1/2, sigma = delta_1/4,
  // C0 = 2 sup|B|; vartheta <= 0 picks log(eps_zone)/log(h).
  static ZoneParams defaults(int d, double eps, double h, int K, double sup_b, double vartheta = 0.0);
  // Throws ConfigError naming the broken inequality.
  void validate() const;
};

// Cells of a uniform grid over a box whose centers satisfy
// |A0 - tau| <= width.
struct EnergyShell {
  double tau = 0.0;
  double width = 0.0;
  Box box;
  double step = 0.0;
  std::vector<int> n;              // cells per axis
  std::vector<std::size_t> cells;  // sorted linear indices of shell cells

  int dimension() const { return box.dimension(); }
  std::size_t total_cells() const;
  Vec center(std::size_t linear) const;
  std::vector<int> unravel(std::size_t linear) const;
  std::optional<std::size_t> ravel(const std::vector<int>& idx) const;
  // position in `cells`, if the point's cell is a shell cell
  std::optional<std::size_t> locate(const Vec& xi) const;
  double cell_volume() const { return std::pow(step, dimension()); }
};

// step <= 0 picks min(gamma_1/8, h^(1-varsigma)/4); box defaults to the
// ellipticity ball of tau + width.
EnergyShell make_shell(const BaseSymbol& a0, double tau, const ZoneParams& p, double step = 0.0,
                       std::optional<Box> box = std::nullopt);

struct ZoneComponent {
  int id = 0;
  int level = 0;  // number of independent resonant frequencies
  QuasiLatticeSubspace V;
  std::vector<Coords> witnesses;
  std::vector<std::size_t> cells;  // positions in shell.cells, sorted
  Box bbox;
  double diameter = 0.0;
  // min over cells and theta outside V of |<grad A0, theta>|
  double transverse_margin = 0.0;
  // max over cells and theta in V \ 0 of |<grad A0, theta>|
  double inner_max = 0.0;
};

struct ZoneDecomposition {
  EnergyShell shell;
  ZoneParams params;
  std::vector<int> component;  // per shell cell, -1 = non-resonant
  std::vector<ZoneComponent> components;
  int absorption_passes = 0;
  std::vector<std::string> notes;

  std::vector<std::size_t> nonresonant_cells() const;
  std::size_t resonant_cell_count() const;
};

double microhyperbolicity_margin(const BaseSymbol& a0, double lambda, const EnergyShell& shell);
// Smallest tangential Hessian eigenvalue over shell cells pulled onto the
// level set. Infinite in d = 1 (no tangent directions).
double convexity_margin(const BaseSymbol& a0, double lambda, const EnergyShell& shell);

// Throws DecompositionError when a component's diameter exceeds
// diameter_factor * c * gamma_level.
ZoneDecomposition classify(const BaseSymbol& a0, const EnergyShell& shell, const FrequencyModule& module,
                           const SumsetK& set, const ZoneParams& params, int threads = 0);

// Level assignment on one point: (level, witnesses).
std::pair<int, std::vector<Coords>> resonance_level(const BaseSymbol& a0, const Vec& xi,
                                                    const FrequencyModule& module,
                                                    const std::vector<Coords>& nonzero, const ZoneParams& params);

// One absorption sweep; returns the number of components merged upward.
int absorb_once(ZoneDecomposition& z);

// Length of {xi in Sigma_lambda : |<grad A0, theta>| < gamma} (d = 2).
double arc_measure(const BaseSymbol& a0, const Vec& theta, double gamma, double lambda);

// Product of smooth steps: 1 on the box, 0 outside the box enlarged by ell.
class CutoffSymbol {
 public:
  CutoffSymbol(Box region, double ell);
  const Box& region() const { return region_; }
  double ell() const { return ell_; }
  Box support() const;
  double operator()(const Vec& xi) const;
  // Max over the samples of |D^alpha Q| * ell^|alpha| for |alpha| = 1, 2,
  // by central differences.
  std::pair<double, double> scaled_derivative_bounds(const std::vector<Vec>& samples) const;

 private:
  Box region_;
  double ell_;
};

// Throws UncertaintyError when ell < h^(1 - varsigma).
CutoffSymbol build_cutoff(const Box& region, double ell, double h, double varsigma);

// Smooth step: 0 for t <= 0, 1 for t >= 1.
double smooth_step(double t);

}  // namespace apgauge
