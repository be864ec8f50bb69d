#pragma once

// Minimal reverse-mode differentiation over dense double matrices. Each op
// records a closure that pushes its output gradient to its parents; backward()
// replays the closures in reverse topological order. Nodes with no
// gradient-requiring ancestors record nothing, so graphs built from constants
// cost the same as plain evaluation.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "plid/margin_view.hpp"
#include "plid/matrix.hpp"

namespace plid::ad {

struct Node {
	Matrix value;
	Matrix grad;
	bool requires_grad = false;
	std::vector<std::shared_ptr<Node>> parents;
	std::function<void(Node &)> backward;

	Matrix &ensure_grad();
};

class Var {
public:
	Var() = default;
	explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

	const Matrix &value() const { return node_->value; }
	const Matrix &grad() const { return node_->grad; }
	bool requires_grad() const { return node_ && node_->requires_grad; }
	std::size_t rows() const { return node_->value.rows(); }
	std::size_t cols() const { return node_->value.cols(); }
	double scalar() const { return node_->value[0]; }
	const std::shared_ptr<Node> &node() const { return node_; }
	explicit operator bool() const { return static_cast<bool>(node_); }

private:
	std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var parameter(Matrix value);

Var matmul(const Var &a, const Var &b);
Var matmul_bt(const Var &a, const Var &b);
Var add(const Var &a, const Var &b);
Var sub(const Var &a, const Var &b);
Var scale(const Var &a, double s);
Var hadamard(const Var &a, const Var &b);
/// Adds the 1×c row to every row of a.
Var add_row(const Var &a, const Var &row);
/// Column sums as a 1×c row.
Var sum_rows(const Var &a);
Var row_normalize(const Var &a, double eps = 1e-8);
Var gather_rows(const Var &a, std::vector<std::size_t> index);
/// out[i, j] = q_i · k_{i·m + j} where m = k.rows / q.rows.
Var block_dot(const Var &q, const Var &k);
/// out_i = Σ_j w[i, j] · v_{i·m + j} where m = w.cols.
Var block_wsum(const Var &w, const Var &v);
Var row_softmax(const Var &a);
Var gelu(const Var &a);

/// out[b, k] = Σ_j w[b, j] · A[k, target_b, j] / (2τ).
Var margin_terms(const Var &w, const MarginView &margins, std::vector<std::size_t> targets, double tau);

/// Batch mean of −log( exp(h_y/τ) / Σ_k exp((h_k + m_k)/τ) ). Returns 1×1.
Var margin_cross_entropy(const Var &logits, const Var &margins, std::vector<std::size_t> targets, double tau);

/// Accumulates d(root)/d(node) into every gradient-requiring ancestor. root must be 1×1.
void backward(const Var &root);

double gelu_value(double x);

} // namespace plid::ad
