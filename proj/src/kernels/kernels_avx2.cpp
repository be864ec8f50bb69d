#include "plid/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#define PLID_AVX2_TARGET __attribute__((target("avx2,fma")))

namespace plid::kernels::avx2 {

namespace {

PLID_AVX2_TARGET inline double horizontal_add(__m256d v)
{
	const __m128d lo = _mm256_castpd256_pd128(v);
	const __m128d hi = _mm256_extractf128_pd(v, 1);
	const __m128d sum = _mm_add_pd(lo, hi);
	return _mm_cvtsd_f64(_mm_add_sd(sum, _mm_unpackhi_pd(sum, sum)));
}

} // namespace

PLID_AVX2_TARGET double dot(const double *x, const double *y, std::size_t n)
{
	__m256d acc0 = _mm256_setzero_pd();
	__m256d acc1 = _mm256_setzero_pd();
	std::size_t i = 0;
	for (; i + 8 <= n; i += 8) {
		acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
		acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
	}
	if (i + 4 <= n) {
		acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
		i += 4;
	}
	double acc = horizontal_add(_mm256_add_pd(acc0, acc1));
	for (; i < n; ++i)
		acc += x[i] * y[i];
	return acc;
}

PLID_AVX2_TARGET void axpy(double a, const double *x, double *y, std::size_t n)
{
	const __m256d va = _mm256_set1_pd(a);
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4)
		_mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
	for (; i < n; ++i)
		y[i] += a * x[i];
}

PLID_AVX2_TARGET void mul_acc(const double *x, const double *y, double *out, std::size_t n)
{
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4)
		_mm256_storeu_pd(out + i, _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), _mm256_loadu_pd(out + i)));
	for (; i < n; ++i)
		out[i] += x[i] * y[i];
}

PLID_AVX2_TARGET void add(const double *x, const double *y, double *out, std::size_t n)
{
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4)
		_mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
	for (; i < n; ++i)
		out[i] = x[i] + y[i];
}

PLID_AVX2_TARGET void scale(double a, double *x, std::size_t n)
{
	const __m256d va = _mm256_set1_pd(a);
	std::size_t i = 0;
	for (; i + 4 <= n; i += 4)
		_mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
	for (; i < n; ++i)
		x[i] *= a;
}

} // namespace plid::kernels::avx2

#else

// Non-x86 builds never dispatch here; forward to the reference kernels so the
// symbols exist.
namespace plid::kernels::avx2 {
double dot(const double *x, const double *y, std::size_t n) { return scalar::dot(x, y, n); }
void axpy(double a, const double *x, double *y, std::size_t n) { scalar::axpy(a, x, y, n); }
void mul_acc(const double *x, const double *y, double *out, std::size_t n) { scalar::mul_acc(x, y, out, n); }
void add(const double *x, const double *y, double *out, std::size_t n) { scalar::add(x, y, out, n); }
void scale(double a, double *x, std::size_t n) { scalar::scale(a, x, n); }
} // namespace plid::kernels::avx2

#endif
