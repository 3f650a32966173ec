#include "apgauge/errors.hpp"
#include "apgauge/types.hpp"

#include <algorithm>
#include <cstdio>

namespace apgauge {

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Resource: return "resource";
    case ErrorCategory::SmallDivisor: return "small-divisor";
    case ErrorCategory::Convergence: return "convergence";
    case ErrorCategory::Numerical: return "numerical";
    case ErrorCategory::Unsupported: return "unsupported";
    case ErrorCategory::Quadrature: return "quadrature";
    case ErrorCategory::Decomposition: return "decomposition";
    case ErrorCategory::Inconsistency: return "inconsistency";
    case ErrorCategory::Uncertainty: return "uncertainty";
  }
  return "unknown";
}

std::vector<Vec> sample_grid(const Box& box, int n) {
  const int d = box.dimension();
  if (n <= 0) throw ConfigError("sample_grid: resolution must be positive");
  std::vector<Vec> out;
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    Vec p(d);
    for (int i = 0; i < d; ++i)
      p[i] = box.lo[i] + (idx[i] + 0.5) * (box.hi[i] - box.lo[i]) / n;
    out.push_back(p);
    int i = 0;
    while (i < d && ++idx[i] == n) idx[i++] = 0;
    if (i == d) break;
  }
  return out;
}

Coords operator+(const Coords& a, const Coords& b) {
  Coords c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] + b[i];
  return c;
}

Coords operator-(const Coords& a) {
  Coords c(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) c[i] = -a[i];
  return c;
}

bool is_zero(const Coords& c) {
  return std::all_of(c.begin(), c.end(), [](long long v) { return v == 0; });
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace apgauge
