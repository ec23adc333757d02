#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "latentshift/matrix.hpp"

namespace latentshift {

inline double stable_sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Reverse-mode gradient tape over Matrix values.
///
/// The op set is exactly what the two training losses need: affine pieces
/// (matmul + row-broadcast bias), elementwise nonlinearities, batch
/// normalization in training mode, dropout with a caller-frozen mask, and the
/// reductions that assemble scalar losses. Backward visits nodes in reverse
/// recording order, which is a reverse topological order by construction.
class Tape {
public:
    using NodeId = std::size_t;

    NodeId leaf(Matrix value) {
        return push(Op::Leaf, value, npos, npos);
    }

    NodeId matmul(NodeId a, NodeId b) {
        return push(Op::MatMul, latentshift::matmul(val(a), val(b)), a, b);
    }

    NodeId add(NodeId a, NodeId b) {
        return push(Op::Add, latentshift::add(val(a), val(b)), a, b);
    }

    NodeId sub(NodeId a, NodeId b) {
        return push(Op::Sub, latentshift::sub(val(a), val(b)), a, b);
    }

    /// Broadcast-add a 1xC row (bias) to every row of a NxC matrix.
    NodeId add_row(NodeId a, NodeId row) {
        const Matrix& x = val(a);
        const Matrix& r = val(row);
        if (r.rows() != 1 || r.cols() != x.cols()) {
            throw ShapeError("add_row: bias " + r.shape_str() + " for input " + x.shape_str());
        }
        Matrix out = x;
        for (std::size_t i = 0; i < out.rows(); ++i) {
            double* oi = out.row_ptr(i);
            for (std::size_t j = 0; j < out.cols(); ++j) oi[j] += r(0, j);
        }
        return push(Op::AddRow, std::move(out), a, row);
    }

    NodeId mul(NodeId a, NodeId b) {
        return push(Op::Mul, hadamard(val(a), val(b)), a, b);
    }

    NodeId scale(NodeId a, double c) {
        Node n = make(Op::Scale, latentshift::scale(val(a), c), a, npos);
        n.c0 = c;
        return push_node(std::move(n));
    }

    NodeId add_const(NodeId a, double c) {
        Matrix out = val(a);
        for (double& v : out.values()) v += c;
        Node n = make(Op::AddConst, std::move(out), a, npos);
        n.c0 = c;
        return push_node(std::move(n));
    }

    NodeId relu(NodeId a) {
        Matrix out = val(a);
        for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
        return push(Op::Relu, std::move(out), a, npos);
    }

    NodeId sigmoid(NodeId a) {
        Matrix out = val(a);
        for (double& v : out.values()) v = stable_sigmoid(v);
        return push(Op::Sigmoid, std::move(out), a, npos);
    }

    NodeId exp(NodeId a) {
        Matrix out = val(a);
        for (double& v : out.values()) v = std::exp(v);
        return push(Op::Exp, std::move(out), a, npos);
    }

    NodeId log(NodeId a) {
        Matrix out = val(a);
        for (double& v : out.values()) v = std::log(v);
        return push(Op::Log, std::move(out), a, npos);
    }

    NodeId square(NodeId a) {
        Matrix out = val(a);
        for (double& v : out.values()) v *= v;
        return push(Op::Square, std::move(out), a, npos);
    }

    /// Clamp with zero gradient outside [lo, hi].
    NodeId clamp(NodeId a, double lo, double hi) {
        Matrix out = val(a);
        for (double& v : out.values()) v = v < lo ? lo : (v > hi ? hi : v);
        Node n = make(Op::Clamp, std::move(out), a, npos);
        n.c0 = lo;
        n.c1 = hi;
        return push_node(std::move(n));
    }

    /// Inverted dropout with a frozen 0/1 mask: out = x * mask / (1 - p).
    NodeId dropout(NodeId a, Matrix mask, double p) {
        const Matrix& x = val(a);
        require_same_shape(x, mask, "dropout");
        const double keep_scale = 1.0 / (1.0 - p);
        Matrix out = x;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.values()[i] *= mask.values()[i] * keep_scale;
        }
        Node n = make(Op::Dropout, std::move(out), a, npos);
        n.c0 = keep_scale;
        n.aux = std::move(mask);
        return push_node(std::move(n));
    }

    /// Batch normalization in training mode: per-column batch statistics with
    /// biased variance, then y = gamma * xhat + beta. gamma/beta are 1xC.
    /// Batch statistics are cached on the node; bn_batch_mean/bn_batch_var
    /// expose them so callers can maintain running statistics.
    NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, double eps) {
        const Matrix& in = val(x);
        const Matrix& g = val(gamma);
        const Matrix& b = val(beta);
        const std::size_t n = in.rows(), c = in.cols();
        if (n < 2) {
            throw ShapeError("batchnorm: needs at least 2 rows, got " + in.shape_str());
        }
        if (g.rows() != 1 || g.cols() != c || b.rows() != 1 || b.cols() != c) {
            throw ShapeError("batchnorm: gamma " + g.shape_str() + ", beta " + b.shape_str() +
                             " for input " + in.shape_str());
        }
        Matrix stats(3, c); // rows: mean, biased var, inv_std
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = in.row_ptr(i);
            for (std::size_t j = 0; j < c; ++j) stats(0, j) += ri[j];
        }
        for (std::size_t j = 0; j < c; ++j) stats(0, j) /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = in.row_ptr(i);
            for (std::size_t j = 0; j < c; ++j) {
                const double d = ri[j] - stats(0, j);
                stats(1, j) += d * d;
            }
        }
        for (std::size_t j = 0; j < c; ++j) {
            stats(1, j) /= static_cast<double>(n);
            stats(2, j) = 1.0 / std::sqrt(stats(1, j) + eps);
        }
        Matrix xhat(n, c);
        Matrix out(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            const double* ri = in.row_ptr(i);
            double* hi = xhat.row_ptr(i);
            double* oi = out.row_ptr(i);
            for (std::size_t j = 0; j < c; ++j) {
                hi[j] = (ri[j] - stats(0, j)) * stats(2, j);
                oi[j] = g(0, j) * hi[j] + b(0, j);
            }
        }
        Node node = make(Op::BatchNorm, std::move(out), x, gamma);
        node.c_in = beta;
        node.c0 = eps;
        node.aux = std::move(xhat);
        node.aux2 = std::move(stats);
        return push_node(std::move(node));
    }

    /// Sum of all entries as a 1x1 matrix.
    NodeId sum(NodeId a) {
        double s = 0.0;
        for (double v : val(a).values()) s += v;
        return push(Op::SumAll, Matrix(1, 1, s), a, npos);
    }

    const Matrix& value(NodeId id) const { return nodes_[id].value; }
    const Matrix& adjoint(NodeId id) const { return nodes_[id].grad; }

    Matrix bn_batch_mean(NodeId id) const { return extract_row(nodes_[id].aux2, 0); }
    Matrix bn_batch_var(NodeId id) const { return extract_row(nodes_[id].aux2, 1); }

    double scalar(NodeId id) const {
        const Matrix& v = val(id);
        if (v.rows() != 1 || v.cols() != 1) {
            throw ShapeError("scalar: node is " + v.shape_str());
        }
        return v(0, 0);
    }

    /// Backpropagate from a 1x1 root. Every node reachable from the root gets
    /// its adjoint accumulated; leaves keep theirs for the caller.
    void backward(NodeId root) {
        const Matrix& rv = val(root);
        if (rv.rows() != 1 || rv.cols() != 1) {
            throw ShapeError("backward: root must be 1x1, got " + rv.shape_str());
        }
        for (auto& n : nodes_) {
            n.grad = Matrix(n.value.rows(), n.value.cols());
        }
        nodes_[root].grad(0, 0) = 1.0;
        for (std::size_t idx = nodes_.size(); idx-- > 0;) {
            back_step(idx);
        }
    }

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        Leaf, MatMul, Add, Sub, AddRow, Mul, Scale, AddConst,
        Relu, Sigmoid, Exp, Log, Square, Clamp, Dropout, BatchNorm, SumAll
    };

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    struct Node {
        Op op;
        std::size_t a_in = npos;
        std::size_t b_in = npos;
        std::size_t c_in = npos;
        double c0 = 0.0;
        double c1 = 0.0;
        Matrix value;
        Matrix grad;
        Matrix aux;
        Matrix aux2;
    };

    const Matrix& val(NodeId id) const { return nodes_[id].value; }

    Node make(Op op, Matrix value, std::size_t a, std::size_t b) {
        Node n;
        n.op = op;
        n.a_in = a;
        n.b_in = b;
        n.value = std::move(value);
        return n;
    }

    NodeId push(Op op, Matrix value, std::size_t a, std::size_t b) {
        return push_node(make(op, std::move(value), a, b));
    }

    NodeId push_node(Node n) {
        nodes_.push_back(std::move(n));
        return nodes_.size() - 1;
    }

    void back_step(std::size_t idx) {
        Node& n = nodes_[idx];
        const Matrix& g = n.grad;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::MatMul: {
                accumulate(n.a_in, latentshift::matmul(g, transpose(val(n.b_in))));
                accumulate(n.b_in, latentshift::matmul(transpose(val(n.a_in)), g));
                break;
            }
            case Op::Add:
                accumulate(n.a_in, g);
                accumulate(n.b_in, g);
                break;
            case Op::Sub: {
                accumulate(n.a_in, g);
                accumulate(n.b_in, latentshift::scale(g, -1.0));
                break;
            }
            case Op::AddRow: {
                accumulate(n.a_in, g);
                Matrix rowg(1, g.cols());
                for (std::size_t i = 0; i < g.rows(); ++i) {
                    const double* gi = g.row_ptr(i);
                    for (std::size_t j = 0; j < g.cols(); ++j) rowg(0, j) += gi[j];
                }
                accumulate(n.b_in, rowg);
                break;
            }
            case Op::Mul:
                accumulate(n.a_in, hadamard(g, val(n.b_in)));
                accumulate(n.b_in, hadamard(g, val(n.a_in)));
                break;
            case Op::Scale:
                accumulate(n.a_in, latentshift::scale(g, n.c0));
                break;
            case Op::AddConst:
                accumulate(n.a_in, g);
                break;
            case Op::Relu: {
                Matrix d = g;
                const Matrix& x = val(n.a_in);
                for (std::size_t i = 0; i < d.size(); ++i) {
                    if (x.values()[i] <= 0.0) d.values()[i] = 0.0;
                }
                accumulate(n.a_in, d);
                break;
            }
            case Op::Sigmoid: {
                Matrix d = g;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double s = n.value.values()[i];
                    d.values()[i] *= s * (1.0 - s);
                }
                accumulate(n.a_in, d);
                break;
            }
            case Op::Exp:
                accumulate(n.a_in, hadamard(g, n.value));
                break;
            case Op::Log: {
                Matrix d = g;
                const Matrix& x = val(n.a_in);
                for (std::size_t i = 0; i < d.size(); ++i) d.values()[i] /= x.values()[i];
                accumulate(n.a_in, d);
                break;
            }
            case Op::Square: {
                Matrix d = g;
                const Matrix& x = val(n.a_in);
                for (std::size_t i = 0; i < d.size(); ++i) d.values()[i] *= 2.0 * x.values()[i];
                accumulate(n.a_in, d);
                break;
            }
            case Op::Clamp: {
                Matrix d = g;
                const Matrix& x = val(n.a_in);
                for (std::size_t i = 0; i < d.size(); ++i) {
                    const double v = x.values()[i];
                    if (v < n.c0 || v > n.c1) d.values()[i] = 0.0;
                }
                accumulate(n.a_in, d);
                break;
            }
            case Op::Dropout: {
                Matrix d = g;
                for (std::size_t i = 0; i < d.size(); ++i) {
                    d.values()[i] *= n.aux.values()[i] * n.c0;
                }
                accumulate(n.a_in, d);
                break;
            }
            case Op::BatchNorm:
                back_batchnorm(n);
                break;
            case Op::SumAll: {
                const double gs = g(0, 0);
                const Matrix& x = val(n.a_in);
                accumulate(n.a_in, Matrix(x.rows(), x.cols(), gs));
                break;
            }
        }
    }

    void back_batchnorm(Node& n) {
        const Matrix& g = n.grad;
        const Matrix& gamma = val(n.b_in);
        const Matrix& xhat = n.aux;
        const std::size_t rows = g.rows(), c = g.cols();
        const double m = static_cast<double>(rows);

        Matrix dgamma(1, c);
        Matrix dbeta(1, c);
        Matrix sum_dxhat(1, c);
        Matrix sum_dxhat_xhat(1, c);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* gi = g.row_ptr(i);
            const double* hi = xhat.row_ptr(i);
            for (std::size_t j = 0; j < c; ++j) {
                dgamma(0, j) += gi[j] * hi[j];
                dbeta(0, j) += gi[j];
                const double dxh = gi[j] * gamma(0, j);
                sum_dxhat(0, j) += dxh;
                sum_dxhat_xhat(0, j) += dxh * hi[j];
            }
        }
        Matrix dx(rows, c);
        for (std::size_t i = 0; i < rows; ++i) {
            const double* gi = g.row_ptr(i);
            const double* hi = xhat.row_ptr(i);
            double* di = dx.row_ptr(i);
            for (std::size_t j = 0; j < c; ++j) {
                const double inv_std = n.aux2(2, j);
                const double dxh = gi[j] * gamma(0, j);
                di[j] = (inv_std / m) * (m * dxh - sum_dxhat(0, j) - hi[j] * sum_dxhat_xhat(0, j));
            }
        }
        accumulate(n.a_in, dx);
        accumulate(n.b_in, dgamma);
        accumulate(n.c_in, dbeta);
    }

    void accumulate(std::size_t target, const Matrix& g) {
        Matrix& acc = nodes_[target].grad;
        require_same_shape(acc, g, "adjoint accumulate");
        for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += g.values()[i];
    }

    std::vector<Node> nodes_;
};

/// A scalar function of a flat parameter vector together with its analytic
/// gradient, as produced by a tape.
struct DifferentiableScalar {
    std::function<double(const Matrix&)> value;
    std::function<Matrix(const Matrix&)> gradient;
};

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
inline double grad_check(const DifferentiableScalar& f, const Matrix& point, double step) {
    if (!(step > 0.0)) {
        throw ValidationError("grad_check: step must be positive");
    }
    const Matrix analytic = f.gradient(point);
    require_same_shape(analytic, point, "grad_check");
    double max_err = 0.0;
    Matrix probe = point;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double original = probe.values()[i];
        probe.values()[i] = original + step;
        const double fp = f.value(probe);
        probe.values()[i] = original - step;
        const double fm = f.value(probe);
        probe.values()[i] = original;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("grad_check: non-finite function value near coordinate " +
                               std::to_string(i));
        }
        const double central = (fp - fm) / (2.0 * step);
        const double a = analytic.values()[i];
        const double err = std::abs(a - central) / std::max(1.0, std::abs(a));
        max_err = std::max(max_err, err);
    }
    return max_err;
}

} // namespace latentshift
