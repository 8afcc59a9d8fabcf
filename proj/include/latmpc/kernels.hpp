#ifndef LATMPC_KERNELS_HPP
#define LATMPC_KERNELS_HPP

#include <cstddef>
#include <span>
#include <string>

// Dense arithmetic kernels behind the linear algebra and training loops.
// Every operation has a scalar reference implementation and, on x86-64,
// an AVX2/FMA variant. The active backend is picked once at startup
// (CPU probe, overridable via LATMPC_KERNELS=scalar|avx2) and the two
// variants are equivalence-tested against each other.

namespace latmpc::kern {

enum class Backend { scalar, avx2 };

// Active backend for this process.
Backend active_backend();

// Force a backend. Throws std::invalid_argument if the requested backend
// is not available on this CPU.
void set_backend(Backend b);

bool avx2_available();

std::string backend_name(Backend b);

// x . y
double dot(std::span<const double> x, std::span<const double> y);

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

// x *= a
void scal(double a, std::span<double> x);

// out = x * y  (elementwise)
void vmul(std::span<const double> x, std::span<const double> y,
          std::span<double> out);

double sum(std::span<const double> x);

// sum of squares
double sumsq(std::span<const double> x);

namespace detail {
struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scal)(double, double*, std::size_t);
  void (*vmul)(const double*, const double*, double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
};

const KernelTable& scalar_table();
#if defined(LATMPC_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
}  // namespace detail

}  // namespace latmpc::kern

#endif  // LATMPC_KERNELS_HPP
