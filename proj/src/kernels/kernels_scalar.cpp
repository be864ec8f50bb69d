#include "plid/kernels.hpp"

namespace plid::kernels::scalar {

double dot(const double *x, const double *y, std::size_t n)
{
	double acc = 0.0;
	for (std::size_t i = 0; i < n; ++i)
		acc += x[i] * y[i];
	return acc;
}

void axpy(double a, const double *x, double *y, std::size_t n)
{
	for (std::size_t i = 0; i < n; ++i)
		y[i] += a * x[i];
}

void mul_acc(const double *x, const double *y, double *out, std::size_t n)
{
	for (std::size_t i = 0; i < n; ++i)
		out[i] += x[i] * y[i];
}

void add(const double *x, const double *y, double *out, std::size_t n)
{
	for (std::size_t i = 0; i < n; ++i)
		out[i] = x[i] + y[i];
}

void scale(double a, double *x, std::size_t n)
{
	for (std::size_t i = 0; i < n; ++i)
		x[i] *= a;
}

} // namespace plid::kernels::scalar
