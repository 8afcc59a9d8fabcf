#include "latmpc/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace latmpc::kern {

namespace {

bool cpu_has_avx2() {
#if defined(LATMPC_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("LATMPC_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
    // unknown value or unavailable backend: fall through to the probe
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

struct State {
  std::atomic<const detail::KernelTable*> table;
  std::atomic<Backend> backend;
  State() {
    Backend b = initial_backend();
    backend.store(b);
    table.store(table_for(b));
  }
  static const detail::KernelTable* table_for(Backend b) {
#if defined(LATMPC_HAVE_AVX2)
    if (b == Backend::avx2) return &detail::avx2_table();
#endif
    (void)b;
    return &detail::scalar_table();
  }
};

State& state() {
  static State s;
  return s;
}

inline const detail::KernelTable& tab() { return *state().table.load(); }

}  // namespace

Backend active_backend() { return state().backend.load(); }

bool avx2_available() { return cpu_has_avx2(); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2())
    throw std::invalid_argument("kernels: avx2 backend not available on this CPU");
  state().backend.store(b);
  state().table.store(State::table_for(b));
}

std::string backend_name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

double dot(std::span<const double> x, std::span<const double> y) {
  return tab().dot(x.data(), y.data(), x.size());
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  tab().axpy(a, x.data(), y.data(), x.size());
}

void scal(double a, std::span<double> x) { tab().scal(a, x.data(), x.size()); }

void vmul(std::span<const double> x, std::span<const double> y,
          std::span<double> out) {
  tab().vmul(x.data(), y.data(), out.data(), x.size());
}

double sum(std::span<const double> x) { return tab().sum(x.data(), x.size()); }

double sumsq(std::span<const double> x) { return tab().sumsq(x.data(), x.size()); }

}  // namespace latmpc::kern
