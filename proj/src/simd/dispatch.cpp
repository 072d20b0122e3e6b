#include <atomic>
#include <cstdlib>

#include "stroketok/simd/kernels.hpp"

namespace stroketok::simd {

#ifndef STROKETOK_HAVE_AVX2
const KernelTable* avx2_kernels() { return nullptr; }
#endif
#ifndef STROKETOK_HAVE_NEON
const KernelTable* neon_kernels() { return nullptr; }
#endif

namespace {

const KernelTable* by_name(std::string_view name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") return avx2_kernels();
  if (name == "neon") return neon_kernels();
  return nullptr;
}

const KernelTable* best() {
  if (const auto* t = avx2_kernels()) return t;
  if (const auto* t = neon_kernels()) return t;
  return &scalar_kernels();
}

const KernelTable* resolve() {
  if (const char* env = std::getenv("STROKETOK_SIMD")) {
    if (const auto* t = by_name(env)) return t;
  }
  return best();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{resolve()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
  const KernelTable* t = name == "auto" ? best() : by_name(name);
  if (t == nullptr) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

std::vector<std::string> available() {
  std::vector<std::string> out{"scalar"};
  if (avx2_kernels()) out.emplace_back("avx2");
  if (neon_kernels()) out.emplace_back("neon");
  return out;
}

}  // namespace stroketok::simd
