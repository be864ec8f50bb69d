#pragma once

// Double-precision inner-loop kernels with a scalar reference and an AVX2/FMA
// variant. The variant is picked once at startup from CPUID; PLID_FORCE_SCALAR=1
// in the environment pins the scalar path.

#include <cstddef>
#include <string_view>

namespace plid::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
	double (*dot)(const double *x, const double *y, std::size_t n);
	// y += a * x
	void (*axpy)(double a, const double *x, double *y, std::size_t n);
	// out += x * y (elementwise)
	void (*mul_acc)(const double *x, const double *y, double *out, std::size_t n);
	// out[i] = x[i] + y[i]
	void (*add)(const double *x, const double *y, double *out, std::size_t n);
	// x *= a
	void (*scale)(double a, double *x, std::size_t n);
};

namespace scalar {
double dot(const double *x, const double *y, std::size_t n);
void axpy(double a, const double *x, double *y, std::size_t n);
void mul_acc(const double *x, const double *y, double *out, std::size_t n);
void add(const double *x, const double *y, double *out, std::size_t n);
void scale(double a, double *x, std::size_t n);
} // namespace scalar

namespace avx2 {
double dot(const double *x, const double *y, std::size_t n);
void axpy(double a, const double *x, double *y, std::size_t n);
void mul_acc(const double *x, const double *y, double *out, std::size_t n);
void add(const double *x, const double *y, double *out, std::size_t n);
void scale(double a, double *x, std::size_t n);
} // namespace avx2

bool cpu_supports(Isa isa);

const KernelTable &table(Isa isa);

/// Currently dispatched table.
const KernelTable &active();
Isa active_isa();
std::string_view isa_name(Isa isa);

/// Override dispatch; throws if the CPU lacks the requested ISA.
void force_isa(Isa isa);

inline double dot(const double *x, const double *y, std::size_t n) { return active().dot(x, y, n); }
inline void axpy(double a, const double *x, double *y, std::size_t n) { active().axpy(a, x, y, n); }
inline void mul_acc(const double *x, const double *y, double *out, std::size_t n) { active().mul_acc(x, y, out, n); }
inline void add(const double *x, const double *y, double *out, std::size_t n) { active().add(x, y, out, n); }
inline void scale(double a, double *x, std::size_t n) { active().scale(a, x, n); }

} // namespace plid::kernels
