#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "stroketok/random.hpp"
#include "stroketok/simd/kernels.hpp"

using namespace stroketok;

namespace {

std::vector<const simd::KernelTable*> variants() {
  std::vector<const simd::KernelTable*> out;
  if (auto* t = simd::avx2_kernels()) out.push_back(t);
  if (auto* t = simd::neon_kernels()) out.push_back(t);
  return out;
}

}  // namespace

TEST_CASE("vector kernels agree with the scalar reference") {
  const auto& ref = simd::scalar_kernels();
  const auto tables = variants();
  MESSAGE("variants available: " << tables.size());
  Rng rng(3);
  for (const auto* t : tables) {
    for (std::size_t n = 0; n < 70; ++n) {
      std::vector<double> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
      }
      const double scale = n == 0 ? 1.0 : n;
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-13 * scale);
      CHECK(std::abs(t->squared_distance(a.data(), b.data(), n) - ref.squared_distance(a.data(), b.data(), n)) <=
            1e-13 * scale);
      auto y1 = b, y2 = b;
      ref.axpy(0.37, a.data(), y1.data(), n);
      t->axpy(0.37, a.data(), y2.data(), n);
      CHECK(y1 == y2);
    }
  }
}

TEST_CASE("kernel selection") {
  const auto names = simd::available();
  REQUIRE_FALSE(names.empty());
  CHECK(names.front() == "scalar");
  const std::string before = simd::active().name;
  CHECK(simd::select("scalar"));
  CHECK(std::string(simd::active().name) == "scalar");
  CHECK_FALSE(simd::select("no-such-kernel"));
  CHECK(simd::select(before));
}

TEST_CASE("scalar reference values") {
  const double a[] = {1, 2, 3}, b[] = {4, -5, 6};
  const auto& k = simd::scalar_kernels();
  CHECK(k.dot(a, b, 3) == 12.0);
  CHECK(k.squared_distance(a, b, 3) == 9.0 + 49.0 + 9.0);
}
