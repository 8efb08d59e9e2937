#pragma once

// Shared exp/tanh/sigmoid algorithm (Cephes-style rational approximation,
// ~1 ulp over the f64 range). The intrinsic variants in the AVX TUs follow
// this exact operation sequence with FMA so that all ISA paths produce
// bit-identical results; keep them in sync when touching either.

#include <cmath>
#include <cstdint>
#include <cstring>

namespace spg::kernels::detail {

inline constexpr double kLog2E = 1.4426950408889634073599;
inline constexpr double kC1 = 6.93145751953125e-1;
inline constexpr double kC2 = 1.42860682030941723212e-6;
inline constexpr double kP0 = 1.26177193074810590878e-4;
inline constexpr double kP1 = 3.02994407707441961300e-2;
inline constexpr double kP2 = 9.99999999999999999910e-1;
inline constexpr double kQ0 = 3.00198505138664455042e-6;
inline constexpr double kQ1 = 2.52448340349684104192e-3;
inline constexpr double kQ2 = 2.27265548208155028766e-1;
inline constexpr double kQ3 = 2.00000000000000000005e0;
inline constexpr double kExpHi = 709.782712893383996843;
inline constexpr double kExpLo = -745.133219101941108420;

inline double bits_to_double(uint64_t u) {
  double d;
  std::memcpy(&d, &u, sizeof(d));
  return d;
}

// y · 2^n via two exact power-of-two factors; n in [-1074, 1024].
inline double scale_pow2(double y, int64_t n) {
  int64_t n1 = ((n + 2048) >> 1) - 1024;  // floor(n/2) kept positive-safe
  int64_t n2 = n - n1;
  double f1 = bits_to_double(static_cast<uint64_t>(n1 + 1023) << 52);
  double f2 = bits_to_double(static_cast<uint64_t>(n2 + 1023) << 52);
  return y * f1 * f2;
}

inline double exp_core(double x) {
  if (x != x) return x;
  if (x > kExpHi) return HUGE_VAL;
  if (x < kExpLo) return 0.0;
  double z = std::floor(kLog2E * x + 0.5);
  double r = std::fma(-z, kC1, x);
  r = std::fma(-z, kC2, r);
  double rr = r * r;
  double px = r * std::fma(std::fma(kP0, rr, kP1), rr, kP2);
  double qx = std::fma(std::fma(std::fma(kQ0, rr, kQ1), rr, kQ2), rr, kQ3);
  double e = px / (qx - px);
  double y = std::fma(2.0, e, 1.0);
  return scale_pow2(y, static_cast<int64_t>(z));
}

inline double tanh_core(double x) {
  double ax = std::fabs(x);
  double t = exp_core(-2.0 * ax);
  double r = (1.0 - t) / (1.0 + t);
  return std::copysign(r, x);
}

inline double sigmoid_core(double x) { return 1.0 / (1.0 + exp_core(-x)); }

}  // namespace spg::kernels::detail
