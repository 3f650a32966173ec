#pragma once

#include <Eigen/Dense>

#include <complex>
#include <string>
#include <vector>

namespace apgauge {

using cplx = std::complex<double>;

// Momentum / position vectors. Dimensions are tiny (d <= 3), so the storage is
// inline and never touches the heap.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

// Integer coordinates of a frequency against a module's generator matrix.
using Coords = std::vector<long long>;

inline constexpr double kPi = 3.14159265358979323846;

// Axis-aligned box in xi-space.
struct Box {
  Vec lo;
  Vec hi;

  int dimension() const { return static_cast<int>(lo.size()); }
  Vec center() const { return (lo + hi) / 2.0; }
  bool contains(const Vec& p) const {
    for (int i = 0; i < dimension(); ++i)
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    return true;
  }
  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dimension(); ++i) v *= (hi[i] - lo[i]);
    return v;
  }
};

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Box make_box(const Vec& lo, const Vec& hi) { return Box{lo, hi}; }

// Uniform tensor grid of `n` points per axis over a box (cell midpoints).
std::vector<Vec> sample_grid(const Box& box, int n);

Coords operator+(const Coords& a, const Coords& b);
Coords operator-(const Coords& a);
bool is_zero(const Coords& c);

// Decimal with 12 significant digits (%.12g).
std::string format_number(double v);

}  // namespace apgauge
