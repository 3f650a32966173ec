#pragma once

#include "apgauge/freqgeom.hpp"
#include "apgauge/operator.hpp"
#include "apgauge/oracle.hpp"
#include "apgauge/spectra.hpp"
#include "apgauge/zones.hpp"

#include <optional>
#include <string>
#include <vector>

namespace apgauge {

struct BaseSpec {
  std::string kind = "isotropic";  // isotropic | diagonal | quartic
  std::vector<double> weights;     // diagonal
  double quartic = 0.0;            // quartic
};

struct ModuleSpec {
  std::vector<std::vector<double>> generators;  // d rows of r entries; empty: identity
  std::vector<Coords> frequencies;              // empty: 0 and +-coefficient frequencies
  std::optional<DecayDecl> decay;
  bool infinite = false;
};

struct MonomialSpec {
  cplx coeff = 0.0;
  std::vector<int> powers;
};

struct CoefficientSpec {
  Coords frequency;
  std::string kind = "constant";  // constant | gaussian | reciprocal_power | polynomial
  cplx value = 1.0;               // constant value or scale
  double param = 1.0;             // gaussian a, reciprocal s
  std::vector<MonomialSpec> monomials;
  bool pair = true;  // also add the conjugate term at -frequency
};

// Negative or empty entries mean "derive from the defaults".
struct ZoneOverrides {
  double c = 1.0;
  double diameter_factor = 2.0;
  double C0 = -1.0;
  std::vector<double> delta;
  double varsigma = -1.0;
  double sigma = -1.0;
};

struct GaugeSpec {
  int M = 1;
  int ad_cap = 8;
  int sumset_order = 4;
  double guard = 0.5;
  int resonant_ad_order = 3;
};

struct OracleSpec {
  int k_points = 200;
  double radius = 0.0;
  double margin = 1.0;
};

struct ConditionsSpec {
  std::vector<double> omega{10.0};
  std::vector<int> L{1};
  std::vector<int> K{2};
  double angle = -1.0;
  double norm = -1.0;
  double covolume = -1.0;
};

struct WindowSpec {
  std::vector<double> lo, hi;  // box in xi
  double ramp = 0.1;           // smooth transition width outside the box
};

struct PropagationPair {
  std::string name;
  WindowSpec q1, q2;
};

struct PropagateSpec {
  std::vector<double> T{1.0};
  int k_samples = 8;
  std::vector<PropagationPair> pairs;
};

struct RunConfig {
  int dimension = 1;
  BaseSpec base;
  ModuleSpec module;
  std::vector<CoefficientSpec> coefficients;
  std::vector<double> eps{0.1};
  std::vector<double> h{0.1};
  std::vector<double> tau{1.0};
  std::vector<int> K{2};
  double vartheta = 0.0;  // 0: log(eps)/log(h)
  EpsLaw eps_law;         // converge: eps = scale h^power
  ZoneOverrides zone;
  GaugeSpec gauge;
  OracleSpec oracle;
  ConditionsSpec conditions;
  PropagateSpec propagate;
  int threads = 0;
  std::string out = "out";

  Operator build_operator() const;
  ModulePtr build_module() const;
  ZoneParams zone_params(const Operator& op, double eps, double h, int K) const;
  PipelineControls pipeline_controls(int K) const;
  OracleControls oracle_controls() const;
};

// Strict parsing: unknown fields, wrong types and broken constraints raise
// ConfigError naming the field (and line:column for syntax errors).
RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {});
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});
// Every field written, defaults included.
std::string serialize_config(const RunConfig& cfg);
void validate_config(const RunConfig& cfg);

}  // namespace apgauge
