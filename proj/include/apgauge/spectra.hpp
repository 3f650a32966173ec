#pragma once

#include "apgauge/gauge.hpp"
#include "apgauge/operator.hpp"
#include "apgauge/oracle.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace apgauge {

struct QuadratureControls {
  double rtol = 1e-5;
  int max_refine = 6;
  int threads = 0;
};

// (2 pi h)^{-d} vol{xi in region : a(xi) <= tau}. d = 1 is exact up to root
// finding; d = 2 refines dyadically near the level set and resolves leaf
// cells by 4 Gauss columns with exact lengths along the second axis.
// Throws QuadratureError if two successive refinements never agree to rtol.
double kappa0_volume(const XiFunction& a, int d, double tau, double h, const Box& region,
                     const QuadratureControls& q = {});
double kappa0_volume(const BaseSymbol& a0, double tau, double h, const QuadratureControls& q = {});

struct PipelineControls {
  int K = 2;  // gauge steps; 0 keeps the raw frequency-0 part
  GaugeControls gauge{.M = 1, .max_steps = 2, .ad_order = 0, .ad_cap = 8, .sumset_order = 4, .guard = 0.5,
                      .stop_at_target = false, .require_target = false, .norm_points = 64};
  // chains on resonant components; d = 2 Ad series cost grows ~3x per order
  GaugeControls resonant_gauge{.M = 1, .max_steps = 2, .ad_order = 3, .ad_cap = 8, .sumset_order = 4, .guard = 0.5,
                               .stop_at_target = false, .require_target = false, .norm_points = 16};
  QuadratureControls quad;
  int fiber_k_points = 16;     // quasimomenta per transverse sample
  int fiber_s_per_cell = 8;    // transverse samples per shell cell width
  double fiber_margin = 0.0;   // 0: automatic basis margin along V
  double fiber_tol = 1e-6;     // doubling check on windowed counts
  int threads = 0;
};

struct ZoneContribution {
  std::string zone;  // "interior", "nonresonant", "component:<id>", "free", "below_spectrum"
  int level = 0;
  double value = 0.0;
  std::size_t cells = 0;
};

struct IdsResult {
  double value = 0.0;  // sum of the contributions, in order
  std::vector<ZoneContribution> zones;
  int steps = 0;  // gauge steps taken on the non-resonant zone
  bool converged = true;
  double remainder_bound = 0.0;
  bool support_exact = true;
  std::vector<std::string> notes;
};

// Default zone parameters for an operator at (eps, h), K gauge steps.
ZoneParams pipeline_params(const Operator& op, double eps, double h, int K);

IdsResult ids_pipeline(const Operator& op, double eps, double h, double tau, const ZoneParams& params,
                       const PipelineControls& ctl = {});
IdsResult ids_pipeline(const Operator& op, double eps, double h, double tau, const PipelineControls& ctl = {});

struct ZoneChain {
  std::string zone;
  GaugeChain chain;
};

// The gauge chains ids_pipeline builds at (eps, h, tau), in zone order.
std::vector<ZoneChain> pipeline_chains(const Operator& op, double eps, double h, double tau, const ZoneParams& params,
                                       const PipelineControls& ctl = {});

// IDS contribution of one resonant component (d = 2, dim V = 1): windowed
// state counts of the 1-d periodic fiber operators along V.
double resonant_fiber_ids(const ZoneDecomposition& z, int component_id, const GaugeChain& chain,
                          const BaseSymbol& a0, double tau, double h, const PipelineControls& ctl = {});

// d = 1: diagonal kernel of the conjugated projector to first order in eps.
double spectral_function_leading(double x, double tau, const Operator& op, double eps, double h,
                                 const ZoneParams& params, const PipelineControls& ctl = {});
double spectral_function_leading(double x, double tau, const Operator& op, double eps, double h,
                                 const PipelineControls& ctl = {});
std::vector<double> spectral_function_leading(const std::vector<double>& xs, double tau, const Operator& op,
                                              double eps, double h, const ZoneParams& params,
                                              const PipelineControls& ctl = {});

struct EpsLaw {
  double scale = 1.0;  // eps = scale * h^power
  double power = 1.0;
  double operator()(double h) const { return scale * std::pow(h, power); }
};

struct SpectralRow {
  double h = 0.0, eps = 0.0, tau = 0.0;
  int K = 0;
  double n_pipeline = 0.0, n_oracle = 0.0, abs_err = 0.0;
  std::map<std::string, double> zones;
  bool has_pipeline = true, has_oracle = true;  // blank columns when false
  bool flagged = false;
  std::string flag;
};

struct SlopeRecord {
  int K = 0;
  double slope = 0.0;
  double increment = 0.0;  // slope minus the previous K's slope (0 for the first)
  int points = 0;
};

struct SpectralTable {
  std::vector<SpectralRow> rows;
  std::vector<SlopeRecord> slopes;

  std::vector<std::string> zone_columns() const;
  std::string csv() const;
  std::string slopes_jsonl() const;
};

struct StudyControls {
  PipelineControls pipeline;
  OracleControls oracle;
  int threads = 0;  // rows in parallel
  // zone parameters per (eps, h, K); empty: pipeline_params
  std::function<ZoneParams(const Operator&, double, double, int)> params;
};

SpectralTable convergence_study(const Operator& op, double tau, const std::vector<double>& hs, const EpsLaw& eps,
                                const std::vector<int>& Ks, const StudyControls& ctl = {});

// Least-squares slope of log y against log x over positive y.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace apgauge
