#pragma once

// Scalar type of the numerical core. The default build stores 32-bit floats;
// defining COIRL_USE_DOUBLE builds the same sources in 64-bit precision under a
// distinct inline namespace so both variants can be linked into one binary
// (the gradient-check suites use the double build).

#ifdef COIRL_USE_DOUBLE
#define COIRL_PRECISION_NS f64
#else
#define COIRL_PRECISION_NS f32
#endif

namespace coirl {
inline namespace COIRL_PRECISION_NS {

#ifdef COIRL_USE_DOUBLE
using Real = double;
#else
using Real = float;
#endif

}  // namespace COIRL_PRECISION_NS
}  // namespace coirl
