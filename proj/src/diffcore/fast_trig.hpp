#pragma once

#include <cstddef>

namespace imface::diff::detail {

/// Vectorizable sin/cos of freq * x for |freq * x| up to ~1e6, accurate to a
/// few ulp. Cody-Waite reduction by pi/2 followed by the fdlibm kernels.
void sincos_scaled(const double* __restrict x, std::size_t n, double freq, double* __restrict sin_out,
                   double* __restrict cos_out);

}  // namespace imface::diff::detail
