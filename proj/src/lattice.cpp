#include "apgauge/lattice.hpp"

#include "apgauge/errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>

namespace apgauge {

namespace {

using boost::multiprecision::cpp_int;
using BigRow = std::vector<cpp_int>;

std::vector<BigRow> to_big(const std::vector<Coords>& rows, std::size_t extra_identity = 0) {
  std::vector<BigRow> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    BigRow r(rows[i].begin(), rows[i].end());
    for (std::size_t k = 0; k < extra_identity; ++k) r.emplace_back(k == i ? 1 : 0);
    out.push_back(std::move(r));
  }
  return out;
}

long long to_ll(const cpp_int& v) {
  if (v > std::numeric_limits<long long>::max() || v < std::numeric_limits<long long>::min())
    throw ResourceError("integer lattice entry exceeds 64-bit range");
  return v.convert_to<long long>();
}

void axpy(BigRow& dst, const cpp_int& q, const BigRow& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] -= q * src[k];
}

// Echelon form over the first `ncols` columns using unimodular row ops.
// Returns the number of pivot rows; rows [0, rank) carry the pivots.
std::size_t echelon(std::vector<BigRow>& m, std::size_t ncols, bool reduce_above) {
  std::size_t prow = 0;
  for (std::size_t col = 0; col < ncols && prow < m.size(); ++col) {
    // Euclid down the column until one nonzero entry remains at prow.
    while (true) {
      std::size_t best = m.size();
      for (std::size_t i = prow; i < m.size(); ++i)
        if (m[i][col] != 0 && (best == m.size() || abs(m[i][col]) < abs(m[best][col]))) best = i;
      if (best == m.size()) break;
      std::swap(m[prow], m[best]);
      bool done = true;
      for (std::size_t i = prow + 1; i < m.size(); ++i) {
        if (m[i][col] == 0) continue;
        const cpp_int q = m[i][col] / m[prow][col];
        axpy(m[i], q, m[prow]);
        if (m[i][col] != 0) done = false;
      }
      if (done) break;
    }
    if (m[prow][col] == 0) continue;
    if (m[prow][col] < 0)
      for (auto& v : m[prow]) v = -v;
    if (reduce_above) {
      for (std::size_t i = 0; i < prow; ++i) {
        cpp_int q = m[i][col] / m[prow][col];
        if (m[i][col] - q * m[prow][col] < 0) q -= 1;
        if (q != 0) axpy(m[i], q, m[prow]);
      }
    }
    ++prow;
  }
  return prow;
}

}  // namespace

std::vector<Coords> hermite_normal_form(const std::vector<Coords>& rows) {
  if (rows.empty()) return {};
  const std::size_t n = rows.front().size();
  for (const auto& r : rows)
    if (r.size() != n) throw ConfigError("hermite_normal_form: ragged rows");
  auto m = to_big(rows);
  const std::size_t rk = echelon(m, n, true);
  std::vector<Coords> out;
  for (std::size_t i = 0; i < rk; ++i) {
    Coords c;
    for (const auto& v : m[i]) c.push_back(to_ll(v));
    out.push_back(std::move(c));
  }
  return out;
}

int integer_rank(const std::vector<Coords>& rows) {
  if (rows.empty()) return 0;
  auto m = to_big(rows);
  return static_cast<int>(echelon(m, rows.front().size(), false));
}

std::vector<Coords> integer_kernel(const std::vector<Coords>& rows) {
  if (rows.empty()) return {};
  const std::size_t n = rows.front().size();
  auto m = to_big(rows, rows.size());
  const std::size_t rk = echelon(m, n, false);
  std::vector<Coords> kernel;
  for (std::size_t i = rk; i < m.size(); ++i) {
    Coords c;
    for (std::size_t k = n; k < m[i].size(); ++k) c.push_back(to_ll(m[i][k]));
    kernel.push_back(std::move(c));
  }
  return hermite_normal_form(kernel);
}

bool in_rational_span(const std::vector<Coords>& rows, const Coords& v) {
  if (is_zero(v)) return true;
  if (rows.empty()) return false;
  auto ext = rows;
  ext.push_back(v);
  return integer_rank(ext) == integer_rank(rows);
}

}  // namespace apgauge
