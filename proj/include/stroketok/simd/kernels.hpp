#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace stroketok::simd {

// Inner-loop kernels shared by the tensor ops and the quantizer search.
// Every variant must agree with the scalar reference: axpy bit-exactly,
// reductions up to summation order.
struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += a * x, evaluated as a separate multiply and add (no fused rounding).
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// Resolved once on first use: STROKETOK_SIMD=scalar|avx2|neon|auto, default auto.
const KernelTable& active();

// Overrides the active table; returns false if `name` is unavailable here.
bool select(std::string_view name);

std::vector<std::string> available();

inline double dot(const double* a, const double* b, std::size_t n) { return active().dot(a, b, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy(a, x, y, n); }
inline double squared_distance(const double* a, const double* b, std::size_t n) {
  return active().squared_distance(a, b, n);
}

}  // namespace stroketok::simd
