#pragma once

#include "apgauge/types.hpp"

#include <vector>

namespace apgauge {

// Row-style Hermite normal form of the Z-span of the given integer rows:
// nonzero rows only, pivots positive, entries above each pivot reduced into
// [0, pivot). Arithmetic is exact (arbitrary precision internally).
std::vector<Coords> hermite_normal_form(const std::vector<Coords>& rows);

// Rank over Q of the matrix whose rows are given.
int integer_rank(const std::vector<Coords>& rows);

// Basis of {n in Z^k : sum_i n_i rows[i] = 0}, k = rows.size().
std::vector<Coords> integer_kernel(const std::vector<Coords>& rows);

// True if v lies in the Q-span of the rows.
bool in_rational_span(const std::vector<Coords>& rows, const Coords& v);

}  // namespace apgauge
