#include "fast_trig.hpp"

#include <cmath>

namespace imface::diff::detail {

namespace {

constexpr double kTwoOverPi = 6.36619772367581382433e-01;
// pi/2 split into three parts; the first two carry 33 significant bits.
constexpr double kPio2Hi = 1.57079632673412561417e+00;
constexpr double kPio2Mid = 6.07710050630396597660e-11;
constexpr double kPio2Lo = 2.02226624879595063154e-21;

constexpr double S1 = -1.66666666666666324348e-01;
constexpr double S2 = 8.33333333332248946124e-03;
constexpr double S3 = -1.98412698298579493134e-04;
constexpr double S4 = 2.75573137070700676789e-06;
constexpr double S5 = -2.50507602534068634195e-08;
constexpr double S6 = 1.58969099521155010221e-10;

constexpr double C1 = 4.16666666666666019037e-02;
constexpr double C2 = -1.38888888888741095749e-03;
constexpr double C3 = 2.48015872894767294178e-05;
constexpr double C4 = -2.75573143513906633035e-07;
constexpr double C5 = 2.08757232129817482790e-09;
constexpr double C6 = -1.13596475577881948265e-11;

}  // namespace

void sincos_scaled(const double* __restrict x, std::size_t n, double freq, double* __restrict sin_out,
                   double* __restrict cos_out) {
  constexpr double kRound = 6755399441055744.0;  // 1.5 * 2^52: adding it rounds to nearest
  for (std::size_t i = 0; i < n; ++i) {
    const double a = freq * x[i];
    const double k = (a * kTwoOverPi + kRound) - kRound;
    const double r = ((a - k * kPio2Hi) - k * kPio2Mid) - k * kPio2Lo;
    const double z = r * r;
    const double s = r + r * z * (S1 + z * (S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)))));
    const double c = 1.0 - (0.5 * z - z * z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6))))));
    // quadrant q = k mod 4: sin = {s, c, -s, -c}, cos = {c, -s, -c, s}
    const double q = k - 4.0 * std::floor(k * 0.25);
    const double odd = q - 2.0 * std::floor(q * 0.5);
    const double sv = odd * c + (1.0 - odd) * s;
    const double cv = odd * s + (1.0 - odd) * c;
    const double sin_sign = q >= 2.0 ? -1.0 : 1.0;
    const double cos_sign = (q == 1.0 || q == 2.0) ? -1.0 : 1.0;
    sin_out[i] = sin_sign * sv;
    cos_out[i] = cos_sign * cv;
  }
}

}  // namespace imface::diff::detail
