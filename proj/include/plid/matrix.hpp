#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace plid {

/// Dense row-major matrix of doubles. Vectors are 1×n matrices.
class Matrix {
public:
	Matrix() = default;
	Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
	Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
	Matrix(std::initializer_list<std::initializer_list<double>> rows);

	static Matrix identity(std::size_t n);
	static Matrix row_vector(std::span<const double> values);

	std::size_t rows() const { return rows_; }
	std::size_t cols() const { return cols_; }
	std::size_t size() const { return data_.size(); }
	bool empty() const { return data_.empty(); }

	double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
	double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
	double &operator[](std::size_t i) { return data_[i]; }
	double operator[](std::size_t i) const { return data_[i]; }

	std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
	std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

	double *data() { return data_.data(); }
	const double *data() const { return data_.data(); }
	std::vector<double> &values() { return data_; }
	const std::vector<double> &values() const { return data_; }

	void fill(double v);
	bool same_shape(const Matrix &other) const { return rows_ == other.rows_ && cols_ == other.cols_; }

	friend bool operator==(const Matrix &a, const Matrix &b) = default;

private:
	std::size_t rows_ = 0;
	std::size_t cols_ = 0;
	std::vector<double> data_;
};

// Products route through the dispatched kernels.
Matrix matmul(const Matrix &a, const Matrix &b);    // a · b
Matrix matmul_bt(const Matrix &a, const Matrix &b); // a · bᵀ
Matrix matmul_at(const Matrix &a, const Matrix &b); // aᵀ · b
Matrix transpose(const Matrix &a);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

/// x / max(‖x‖, eps).
std::vector<double> normalized(std::span<const double> x, double eps = 1e-8);
double cosine(std::span<const double> a, std::span<const double> b, double eps = 1e-8);

double max_abs_diff(const Matrix &a, const Matrix &b);

} // namespace plid
