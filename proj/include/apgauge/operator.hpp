#pragma once

#include "apgauge/ap_symbol.hpp"
#include "apgauge/base_symbol.hpp"

namespace apgauge {

// A = A0(hD) + eps * B(x, hD); eps and h are supplied per run.
struct Operator {
  BaseSymbol a0;
  APSymbol b;

  const ModulePtr& module() const { return b.module(); }
  int dimension() const { return a0.dimension(); }
};

}  // namespace apgauge
