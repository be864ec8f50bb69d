#include "plid/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "plid/errors.hpp"
#include "plid/kernels.hpp"

namespace plid {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) : rows_(rows), cols_(cols), data_(std::move(data))
{
	if (data_.size() != rows * cols)
		throw ShapeError("matrix data size does not match shape");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0)
{
	data_.reserve(rows_ * cols_);
	for (const auto &r : rows) {
		if (r.size() != cols_)
			throw ShapeError("ragged matrix initializer");
		data_.insert(data_.end(), r.begin(), r.end());
	}
}

Matrix Matrix::identity(std::size_t n)
{
	Matrix m(n, n);
	for (std::size_t i = 0; i < n; ++i)
		m(i, i) = 1.0;
	return m;
}

Matrix Matrix::row_vector(std::span<const double> values)
{
	return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double v)
{
	std::fill(data_.begin(), data_.end(), v);
}

Matrix matmul(const Matrix &a, const Matrix &b)
{
	if (a.cols() != b.rows())
		throw ShapeError("matmul: inner dimensions differ");
	Matrix out(a.rows(), b.cols());
	const auto &k = kernels::active();
	for (std::size_t i = 0; i < a.rows(); ++i) {
		double *dst = out.data() + i * out.cols();
		for (std::size_t p = 0; p < a.cols(); ++p) {
			const double s = a(i, p);
			if (s != 0.0)
				k.axpy(s, b.data() + p * b.cols(), dst, b.cols());
		}
	}
	return out;
}

Matrix matmul_bt(const Matrix &a, const Matrix &b)
{
	if (a.cols() != b.cols())
		throw ShapeError("matmul_bt: row widths differ");
	Matrix out(a.rows(), b.rows());
	const auto &k = kernels::active();
	for (std::size_t i = 0; i < a.rows(); ++i)
		for (std::size_t j = 0; j < b.rows(); ++j)
			out(i, j) = k.dot(a.data() + i * a.cols(), b.data() + j * b.cols(), a.cols());
	return out;
}

Matrix matmul_at(const Matrix &a, const Matrix &b)
{
	if (a.rows() != b.rows())
		throw ShapeError("matmul_at: row counts differ");
	Matrix out(a.cols(), b.cols());
	const auto &k = kernels::active();
	for (std::size_t p = 0; p < a.rows(); ++p)
		for (std::size_t i = 0; i < a.cols(); ++i) {
			const double s = a(p, i);
			if (s != 0.0)
				k.axpy(s, b.data() + p * b.cols(), out.data() + i * out.cols(), b.cols());
		}
	return out;
}

Matrix transpose(const Matrix &a)
{
	Matrix out(a.cols(), a.rows());
	for (std::size_t i = 0; i < a.rows(); ++i)
		for (std::size_t j = 0; j < a.cols(); ++j)
			out(j, i) = a(i, j);
	return out;
}

double dot(std::span<const double> a, std::span<const double> b)
{
	if (a.size() != b.size())
		throw ShapeError("dot: length mismatch");
	return kernels::dot(a.data(), b.data(), a.size());
}

double l2_norm(std::span<const double> a)
{
	return std::sqrt(kernels::dot(a.data(), a.data(), a.size()));
}

std::vector<double> normalized(std::span<const double> x, double eps)
{
	const double n = std::max(l2_norm(x), eps);
	std::vector<double> out(x.begin(), x.end());
	for (auto &v : out)
		v /= n;
	return out;
}

double cosine(std::span<const double> a, std::span<const double> b, double eps)
{
	return dot(a, b) / (std::max(l2_norm(a), eps) * std::max(l2_norm(b), eps));
}

double max_abs_diff(const Matrix &a, const Matrix &b)
{
	if (!a.same_shape(b))
		throw ShapeError("max_abs_diff: shape mismatch");
	double m = 0.0;
	for (std::size_t i = 0; i < a.size(); ++i)
		m = std::max(m, std::abs(a[i] - b[i]));
	return m;
}

} // namespace plid
