#include <atomic>
#include <cstdlib>
#include <string>

#include "etsi/errors.hpp"
#include "variants.hpp"

namespace etsi::simd {

namespace {

struct KernelTable {
  Backend backend;
  KernelSums (*sums)(std::span<const double>, std::span<const double>, double, double);
  KernelSums (*sums_weighted)(std::span<const double>, std::span<const double>,
                              std::span<const double>, double, double);
  void (*weights)(std::span<const double>, double, double, std::span<double>);
};

constexpr KernelTable kScalar{Backend::scalar, &scalar::gauss_sums, &scalar::gauss_sums_weighted,
                              &scalar::gauss_weights};
#if defined(ETSI_HAVE_AVX2)
constexpr KernelTable kAvx2{Backend::avx2, &avx2::gauss_sums, &avx2::gauss_sums_weighted,
                            &avx2::gauss_weights};
#endif
#if defined(ETSI_HAVE_NEON)
constexpr KernelTable kNeon{Backend::neon, &neon::gauss_sums, &neon::gauss_sums_weighted,
                            &neon::gauss_weights};
#endif

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &kScalar;
    case Backend::avx2:
#if defined(ETSI_HAVE_AVX2)
      if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return &kAvx2;
#endif
      return nullptr;
    case Backend::neon:
#if defined(ETSI_HAVE_NEON)
      return &kNeon;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("ETSI_SIMD")) {
    const std::string want(env);
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
      if (want == backend_name(b)) {
        if (const KernelTable* t = table_for(b)) return t;
      }
    }
  }
  for (Backend b : {Backend::avx2, Backend::neon}) {
    if (const KernelTable* t = table_for(b)) return t;
  }
  return &kScalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

KernelSums gauss_sums(std::span<const double> xs, std::span<const double> ys, double center,
                      double inv_h) {
  return current().load(std::memory_order_relaxed)->sums(xs, ys, center, inv_h);
}

KernelSums gauss_sums_weighted(std::span<const double> xs, std::span<const double> prior,
                               std::span<const double> ys, double center, double inv_h) {
  return current().load(std::memory_order_relaxed)->sums_weighted(xs, prior, ys, center, inv_h);
}

void gauss_weights(std::span<const double> xs, double center, double inv_h,
                   std::span<double> out) {
  current().load(std::memory_order_relaxed)->weights(xs, center, inv_h, out);
}

Backend active_backend() { return current().load()->backend; }

bool backend_available(Backend b) { return table_for(b) != nullptr; }

void set_backend(Backend b) {
  const KernelTable* t = table_for(b);
  if (t == nullptr) {
    throw UsageError("kernel backend '" + std::string(backend_name(b)) +
                     "' is not available on this build or CPU");
  }
  current().store(t);
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

}  // namespace etsi::simd
