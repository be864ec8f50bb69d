#include "plid/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <unordered_set>

#include "plid/errors.hpp"
#include "plid/kernels.hpp"

namespace plid::ad {

Matrix &Node::ensure_grad()
{
	if (!grad.same_shape(value))
		grad = Matrix(value.rows(), value.cols());
	return grad;
}

namespace {

using NodePtr = std::shared_ptr<Node>;

Var make(Matrix value, std::vector<NodePtr> parents, std::function<void(Node &)> backward)
{
	auto node = std::make_shared<Node>();
	node->value = std::move(value);
	const bool any = std::any_of(parents.begin(), parents.end(), [](const NodePtr &p) { return p->requires_grad; });
	if (any) {
		node->requires_grad = true;
		node->parents = std::move(parents);
		node->backward = std::move(backward);
	}
	return Var(std::move(node));
}

void accumulate(const NodePtr &target, const Matrix &delta)
{
	if (!target->requires_grad)
		return;
	auto &g = target->ensure_grad();
	kernels::axpy(1.0, delta.data(), g.data(), g.size());
}

void require_same(const Var &a, const Var &b, const char *op)
{
	if (!a.value().same_shape(b.value()))
		throw ShapeError(std::string(op) + ": shape mismatch");
}

} // namespace

Var constant(Matrix value)
{
	auto node = std::make_shared<Node>();
	node->value = std::move(value);
	return Var(std::move(node));
}

Var parameter(Matrix value)
{
	auto node = std::make_shared<Node>();
	node->value = std::move(value);
	node->requires_grad = true;
	return Var(std::move(node));
}

Var matmul(const Var &a, const Var &b)
{
	auto pa = a.node(), pb = b.node();
	return make(plid::matmul(a.value(), b.value()), {pa, pb}, [pa, pb](Node &out) {
		if (pa->requires_grad)
			accumulate(pa, matmul_bt(out.grad, pb->value));
		if (pb->requires_grad)
			accumulate(pb, matmul_at(pa->value, out.grad));
	});
}

Var matmul_bt(const Var &a, const Var &b)
{
	auto pa = a.node(), pb = b.node();
	return make(plid::matmul_bt(a.value(), b.value()), {pa, pb}, [pa, pb](Node &out) {
		if (pa->requires_grad)
			accumulate(pa, plid::matmul(out.grad, pb->value));
		if (pb->requires_grad)
			accumulate(pb, matmul_at(out.grad, pa->value));
	});
}

Var add(const Var &a, const Var &b)
{
	require_same(a, b, "add");
	Matrix v(a.rows(), a.cols());
	kernels::add(a.value().data(), b.value().data(), v.data(), v.size());
	auto pa = a.node(), pb = b.node();
	return make(std::move(v), {pa, pb}, [pa, pb](Node &out) {
		accumulate(pa, out.grad);
		accumulate(pb, out.grad);
	});
}

Var sub(const Var &a, const Var &b)
{
	require_same(a, b, "sub");
	Matrix v = a.value();
	kernels::axpy(-1.0, b.value().data(), v.data(), v.size());
	auto pa = a.node(), pb = b.node();
	return make(std::move(v), {pa, pb}, [pa, pb](Node &out) {
		accumulate(pa, out.grad);
		if (pb->requires_grad)
			kernels::axpy(-1.0, out.grad.data(), pb->ensure_grad().data(), out.grad.size());
	});
}

Var scale(const Var &a, double s)
{
	Matrix v = a.value();
	kernels::scale(s, v.data(), v.size());
	auto pa = a.node();
	return make(std::move(v), {pa}, [pa, s](Node &out) {
		kernels::axpy(s, out.grad.data(), pa->ensure_grad().data(), out.grad.size());
	});
}

Var hadamard(const Var &a, const Var &b)
{
	require_same(a, b, "hadamard");
	Matrix v(a.rows(), a.cols());
	kernels::mul_acc(a.value().data(), b.value().data(), v.data(), v.size());
	auto pa = a.node(), pb = b.node();
	return make(std::move(v), {pa, pb}, [pa, pb](Node &out) {
		const std::size_t n = out.grad.size();
		if (pa->requires_grad)
			kernels::mul_acc(out.grad.data(), pb->value.data(), pa->ensure_grad().data(), n);
		if (pb->requires_grad)
			kernels::mul_acc(out.grad.data(), pa->value.data(), pb->ensure_grad().data(), n);
	});
}

Var add_row(const Var &a, const Var &row)
{
	if (row.rows() != 1 || row.cols() != a.cols())
		throw ShapeError("add_row: row must be 1×cols");
	Matrix v(a.rows(), a.cols());
	for (std::size_t i = 0; i < a.rows(); ++i)
		kernels::add(a.value().data() + i * a.cols(), row.value().data(), v.data() + i * a.cols(), a.cols());
	auto pa = a.node(), pr = row.node();
	return make(std::move(v), {pa, pr}, [pa, pr](Node &out) {
		accumulate(pa, out.grad);
		if (pr->requires_grad) {
			auto &g = pr->ensure_grad();
			for (std::size_t i = 0; i < out.grad.rows(); ++i)
				kernels::axpy(1.0, out.grad.data() + i * out.grad.cols(), g.data(), g.size());
		}
	});
}

Var sum_rows(const Var &a)
{
	Matrix v(1, a.cols());
	for (std::size_t i = 0; i < a.rows(); ++i)
		kernels::axpy(1.0, a.value().data() + i * a.cols(), v.data(), a.cols());
	auto pa = a.node();
	return make(std::move(v), {pa}, [pa](Node &out) {
		auto &g = pa->ensure_grad();
		for (std::size_t i = 0; i < g.rows(); ++i)
			kernels::axpy(1.0, out.grad.data(), g.data() + i * g.cols(), g.cols());
	});
}

Var row_normalize(const Var &a, double eps)
{
	const std::size_t r = a.rows(), c = a.cols();
	Matrix v = a.value();
	std::vector<double> norms(r);
	for (std::size_t i = 0; i < r; ++i) {
		norms[i] = std::sqrt(kernels::dot(v.data() + i * c, v.data() + i * c, c));
		kernels::scale(1.0 / std::max(norms[i], eps), v.data() + i * c, c);
	}
	auto pa = a.node();
	return make(std::move(v), {pa}, [pa, norms = std::move(norms), eps, c](Node &out) {
		auto &g = pa->ensure_grad();
		for (std::size_t i = 0; i < norms.size(); ++i) {
			const double *y = out.value.data() + i * c;
			const double *dy = out.grad.data() + i * c;
			double *dx = g.data() + i * c;
			if (norms[i] > eps) {
				// (dy − y (y·dy)) / ‖x‖
				const double proj = kernels::dot(y, dy, c);
				const double inv = 1.0 / norms[i];
				kernels::axpy(inv, dy, dx, c);
				kernels::axpy(-proj * inv, y, dx, c);
			} else {
				kernels::axpy(1.0 / eps, dy, dx, c);
			}
		}
	});
}

Var gather_rows(const Var &a, std::vector<std::size_t> index)
{
	const std::size_t c = a.cols();
	Matrix v(index.size(), c);
	for (std::size_t i = 0; i < index.size(); ++i) {
		if (index[i] >= a.rows())
			throw ShapeError("gather_rows: index out of range");
		std::copy_n(a.value().data() + index[i] * c, c, v.data() + i * c);
	}
	auto pa = a.node();
	return make(std::move(v), {pa}, [pa, index = std::move(index), c](Node &out) {
		auto &g = pa->ensure_grad();
		for (std::size_t i = 0; i < index.size(); ++i)
			kernels::axpy(1.0, out.grad.data() + i * c, g.data() + index[i] * c, c);
	});
}

Var block_dot(const Var &q, const Var &k)
{
	const std::size_t r = q.rows(), d = q.cols();
	if (r == 0 || k.rows() % r != 0 || k.cols() != d)
		throw ShapeError("block_dot: support rows must be a multiple of query rows with equal width");
	const std::size_t m = k.rows() / r;
	Matrix v(r, m);
	for (std::size_t i = 0; i < r; ++i)
		for (std::size_t j = 0; j < m; ++j)
			v(i, j) = kernels::dot(q.value().data() + i * d, k.value().data() + (i * m + j) * d, d);
	auto pq = q.node(), pk = k.node();
	return make(std::move(v), {pq, pk}, [pq, pk, r, m, d](Node &out) {
		for (std::size_t i = 0; i < r; ++i)
			for (std::size_t j = 0; j < m; ++j) {
				const double g = out.grad(i, j);
				if (pq->requires_grad)
					kernels::axpy(g, pk->value.data() + (i * m + j) * d, pq->ensure_grad().data() + i * d, d);
				if (pk->requires_grad)
					kernels::axpy(g, pq->value.data() + i * d, pk->ensure_grad().data() + (i * m + j) * d, d);
			}
	});
}

Var block_wsum(const Var &w, const Var &v)
{
	const std::size_t r = w.rows(), m = w.cols(), d = v.cols();
	if (v.rows() != r * m)
		throw ShapeError("block_wsum: value rows must equal rows·block");
	Matrix out(r, d);
	for (std::size_t i = 0; i < r; ++i)
		for (std::size_t j = 0; j < m; ++j)
			kernels::axpy(w.value()(i, j), v.value().data() + (i * m + j) * d, out.data() + i * d, d);
	auto pw = w.node(), pv = v.node();
	return make(std::move(out), {pw, pv}, [pw, pv, r, m, d](Node &o) {
		for (std::size_t i = 0; i < r; ++i)
			for (std::size_t j = 0; j < m; ++j) {
				const double *row = pv->value.data() + (i * m + j) * d;
				if (pw->requires_grad)
					pw->ensure_grad()(i, j) += kernels::dot(o.grad.data() + i * d, row, d);
				if (pv->requires_grad)
					kernels::axpy(pw->value(i, j), o.grad.data() + i * d, pv->ensure_grad().data() + (i * m + j) * d, d);
			}
	});
}

Var row_softmax(const Var &a)
{
	Matrix v = a.value();
	const std::size_t c = v.cols();
	for (std::size_t i = 0; i < v.rows(); ++i) {
		auto row = v.row(i);
		const double mx = *std::max_element(row.begin(), row.end());
		double total = 0.0;
		for (auto &x : row) {
			x = std::exp(x - mx);
			total += x;
		}
		for (auto &x : row)
			x /= total;
	}
	auto pa = a.node();
	return make(std::move(v), {pa}, [pa, c](Node &out) {
		auto &g = pa->ensure_grad();
		for (std::size_t i = 0; i < out.value.rows(); ++i) {
			const double *p = out.value.data() + i * c;
			const double *dp = out.grad.data() + i * c;
			const double inner = kernels::dot(p, dp, c);
			for (std::size_t j = 0; j < c; ++j)
				g(i, j) += p[j] * (dp[j] - inner);
		}
	});
}

double gelu_value(double x)
{
	return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2));
}

Var gelu(const Var &a)
{
	Matrix v = a.value();
	for (auto &x : v.values())
		x = gelu_value(x);
	auto pa = a.node();
	return make(std::move(v), {pa}, [pa](Node &out) {
		auto &g = pa->ensure_grad();
		const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
		for (std::size_t i = 0; i < g.size(); ++i) {
			const double x = pa->value[i];
			const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
			const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
			g[i] += out.grad[i] * (cdf + x * pdf);
		}
	});
}

Var margin_terms(const Var &w, const MarginView &margins, std::vector<std::size_t> targets, double tau)
{
	if (!(tau > 0.0))
		throw ValidationError("margin_terms: tau must be positive");
	const std::size_t b = w.rows(), d = w.cols(), c = margins.classes;
	if (targets.size() != b || d != margins.dim)
		throw ShapeError("margin_terms: batch or width mismatch");
	const double inv = 1.0 / (2.0 * tau);
	Matrix v(b, c);
	for (std::size_t i = 0; i < b; ++i) {
		if (targets[i] >= c)
			throw ShapeError("margin_terms: target out of range");
		for (std::size_t k = 0; k < c; ++k)
			v(i, k) = kernels::dot(w.value().data() + i * d, margins.pair(k, targets[i]), d) * inv;
	}
	auto pw = w.node();
	return make(std::move(v), {pw}, [pw, margins, targets = std::move(targets), inv, c, d](Node &out) {
		auto &g = pw->ensure_grad();
		for (std::size_t i = 0; i < targets.size(); ++i)
			for (std::size_t k = 0; k < c; ++k)
				kernels::axpy(out.grad(i, k) * inv, margins.pair(k, targets[i]), g.data() + i * d, d);
	});
}

Var margin_cross_entropy(const Var &logits, const Var &margins, std::vector<std::size_t> targets, double tau)
{
	if (!(tau > 0.0))
		throw ValidationError("margin_cross_entropy: tau must be positive");
	require_same(logits, margins, "margin_cross_entropy");
	const std::size_t b = logits.rows(), c = logits.cols();
	if (targets.size() != b || b == 0)
		throw ShapeError("margin_cross_entropy: target count mismatch");
	Matrix probs(b, c);
	double total = 0.0;
	for (std::size_t i = 0; i < b; ++i) {
		const std::size_t y = targets[i];
		if (y >= c)
			throw ShapeError("margin_cross_entropy: target out of range");
		double mx = -std::numeric_limits<double>::infinity();
		for (std::size_t k = 0; k < c; ++k) {
			const double z = (logits.value()(i, k) + margins.value()(i, k)) / tau;
			if (!std::isfinite(z))
				throw NumericError("margin_cross_entropy: non-finite logit or margin");
			probs(i, k) = z;
			mx = std::max(mx, z);
		}
		double sum = 0.0;
		for (std::size_t k = 0; k < c; ++k) {
			probs(i, k) = std::exp(probs(i, k) - mx);
			sum += probs(i, k);
		}
		for (std::size_t k = 0; k < c; ++k)
			probs(i, k) /= sum;
		total += mx + std::log(sum) - logits.value()(i, y) / tau;
	}
	Matrix v(1, 1, total / static_cast<double>(b));
	auto pl = logits.node(), pm = margins.node();
	return make(std::move(v), {pl, pm}, [pl, pm, probs = std::move(probs), targets = std::move(targets), tau](Node &out) {
		const double s = out.grad[0] / (static_cast<double>(targets.size()) * tau);
		if (pl->requires_grad) {
			auto &g = pl->ensure_grad();
			kernels::axpy(s, probs.data(), g.data(), g.size());
			for (std::size_t i = 0; i < targets.size(); ++i)
				g(i, targets[i]) -= s;
		}
		if (pm->requires_grad) {
			auto &g = pm->ensure_grad();
			kernels::axpy(s, probs.data(), g.data(), g.size());
		}
	});
}

void backward(const Var &root)
{
	if (root.rows() != 1 || root.cols() != 1)
		throw ShapeError("backward: root must be a scalar");
	if (!root.requires_grad())
		return;
	std::vector<Node *> order;
	std::unordered_set<Node *> visited;
	// Iterative post-order DFS.
	std::vector<std::pair<Node *, std::size_t>> stack{{root.node().get(), 0}};
	visited.insert(root.node().get());
	while (!stack.empty()) {
		auto &[node, next] = stack.back();
		if (next < node->parents.size()) {
			Node *p = node->parents[next++].get();
			if (p->requires_grad && visited.insert(p).second)
				stack.emplace_back(p, 0);
		} else {
			order.push_back(node);
			stack.pop_back();
		}
	}
	root.node()->ensure_grad()[0] += 1.0;
	for (auto it = order.rbegin(); it != order.rend(); ++it) {
		Node *n = *it;
		if (n->backward && n->grad.same_shape(n->value))
			n->backward(*n);
	}
}

} // namespace plid::ad
