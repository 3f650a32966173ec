#pragma once

#include <stdexcept>
#include <string>

namespace apgauge {

// Each category maps to a distinct CLI exit status.
enum class ErrorCategory : int {
  Config = 2,
  Resource = 3,
  SmallDivisor = 4,
  Convergence = 5,
  Numerical = 6,
  Unsupported = 7,
  Quadrature = 8,
  Decomposition = 9,
  Inconsistency = 10,
  Uncertainty = 11,
};

const char* category_name(ErrorCategory c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

#define APGAUGE_DEFINE_ERROR(Name, Cat)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(ErrorCategory::Cat, what) {} \
  };

APGAUGE_DEFINE_ERROR(ConfigError, Config)
APGAUGE_DEFINE_ERROR(ResourceError, Resource)
APGAUGE_DEFINE_ERROR(SmallDivisorError, SmallDivisor)
APGAUGE_DEFINE_ERROR(ConvergenceError, Convergence)
APGAUGE_DEFINE_ERROR(NumericalError, Numerical)
APGAUGE_DEFINE_ERROR(UnsupportedError, Unsupported)
APGAUGE_DEFINE_ERROR(QuadratureError, Quadrature)
APGAUGE_DEFINE_ERROR(DecompositionError, Decomposition)
APGAUGE_DEFINE_ERROR(InconsistencyError, Inconsistency)
APGAUGE_DEFINE_ERROR(UncertaintyError, Uncertainty)

#undef APGAUGE_DEFINE_ERROR

}  // namespace apgauge
