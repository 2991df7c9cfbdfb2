#include "smm/ad.hpp"

#include <cmath>

namespace smm::ad {

int Tape::push(Mat v, bool needs_grad) {
    values_.push_back(std::move(v));
    grads_.emplace_back();
    needs_grad_.push_back(needs_grad);
    backprop_.emplace_back();
    return static_cast<int>(values_.size()) - 1;
}

void Tape::ensure_grad(int id) {
    if (grads_[id].size() == 0)
        grads_[id] = Mat::Zero(values_[id].rows(), values_[id].cols());
}

Var Tape::input(Mat v) { return {push(std::move(v), true)}; }
Var Tape::constant(Mat v) { return {push(std::move(v), false)}; }

double Tape::scalar(Var v) const {
    const Mat& m = values_[v.id];
    if (m.rows() != 1 || m.cols() != 1) throw Error("scalar() on non-1x1 node");
    return m(0, 0);
}

void Tape::backward(Var root) {
    if (values_[root.id].rows() != 1 || values_[root.id].cols() != 1)
        throw Error("backward() root must be 1x1");
    for (auto& g : grads_) g.resize(0, 0);
    ensure_grad(root.id);
    grads_[root.id](0, 0) = 1.0;
    for (int i = root.id; i >= 0; --i) {
        if (backprop_[i] && grads_[i].size() != 0) backprop_[i]();
    }
    // Leaves touched by no op keep a zero gradient rather than an empty one.
    for (std::size_t i = 0; i < values_.size(); ++i)
        if (needs_grad_[i]) ensure_grad(static_cast<int>(i));
}

Var Tape::add(Var a, Var b) {
    Mat v = values_[a.id] + values_[b.id];
    int out = push(std::move(v), needs_grad_[a.id] || needs_grad_[b.id]);
    backprop_[out] = [this, a, b, out]() {
        if (needs_grad_[a.id]) { ensure_grad(a.id); grads_[a.id] += grads_[out]; }
        if (needs_grad_[b.id]) { ensure_grad(b.id); grads_[b.id] += grads_[out]; }
    };
    return {out};
}

Var Tape::sub(Var a, Var b) {
    Mat v = values_[a.id] - values_[b.id];
    int out = push(std::move(v), needs_grad_[a.id] || needs_grad_[b.id]);
    backprop_[out] = [this, a, b, out]() {
        if (needs_grad_[a.id]) { ensure_grad(a.id); grads_[a.id] += grads_[out]; }
        if (needs_grad_[b.id]) { ensure_grad(b.id); grads_[b.id] -= grads_[out]; }
    };
    return {out};
}

Var Tape::mul(Var a, Var b) {
    Mat v = values_[a.id].cwiseProduct(values_[b.id]);
    int out = push(std::move(v), needs_grad_[a.id] || needs_grad_[b.id]);
    backprop_[out] = [this, a, b, out]() {
        if (needs_grad_[a.id]) {
            ensure_grad(a.id);
            grads_[a.id] += grads_[out].cwiseProduct(values_[b.id]);
        }
        if (needs_grad_[b.id]) {
            ensure_grad(b.id);
            grads_[b.id] += grads_[out].cwiseProduct(values_[a.id]);
        }
    };
    return {out};
}

Var Tape::scale(Var a, double s) {
    Mat v = values_[a.id] * s;
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out, s]() {
            ensure_grad(a.id);
            grads_[a.id] += grads_[out] * s;
        };
    return {out};
}

Var Tape::add_scalar(Var a, double s) {
    Mat v = values_[a.id].array() + s;
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() { ensure_grad(a.id); grads_[a.id] += grads_[out]; };
    return {out};
}

Var Tape::add_rowvec(Var m, Var r) {
    Mat v = values_[m.id].rowwise() + values_[r.id].row(0);
    int out = push(std::move(v), needs_grad_[m.id] || needs_grad_[r.id]);
    backprop_[out] = [this, m, r, out]() {
        if (needs_grad_[m.id]) { ensure_grad(m.id); grads_[m.id] += grads_[out]; }
        if (needs_grad_[r.id]) {
            ensure_grad(r.id);
            grads_[r.id] += grads_[out].colwise().sum();
        }
    };
    return {out};
}

Var Tape::mul_rowvec(Var m, Var r) {
    Mat v = values_[m.id].array().rowwise() * values_[r.id].row(0).array();
    int out = push(std::move(v), needs_grad_[m.id] || needs_grad_[r.id]);
    backprop_[out] = [this, m, r, out]() {
        if (needs_grad_[m.id]) {
            ensure_grad(m.id);
            grads_[m.id].array() += grads_[out].array().rowwise() * values_[r.id].row(0).array();
        }
        if (needs_grad_[r.id]) {
            ensure_grad(r.id);
            grads_[r.id] += (grads_[out].cwiseProduct(values_[m.id])).colwise().sum();
        }
    };
    return {out};
}

Var Tape::sub_bcast(Var m, Var s) {
    Mat v = values_[m.id].array() - values_[s.id](0, 0);
    int out = push(std::move(v), needs_grad_[m.id] || needs_grad_[s.id]);
    backprop_[out] = [this, m, s, out]() {
        if (needs_grad_[m.id]) { ensure_grad(m.id); grads_[m.id] += grads_[out]; }
        if (needs_grad_[s.id]) {
            ensure_grad(s.id);
            grads_[s.id](0, 0) -= grads_[out].sum();
        }
    };
    return {out};
}

Var Tape::mul_bcast(Var m, Var s) {
    Mat v = values_[m.id] * values_[s.id](0, 0);
    int out = push(std::move(v), needs_grad_[m.id] || needs_grad_[s.id]);
    backprop_[out] = [this, m, s, out]() {
        if (needs_grad_[m.id]) {
            ensure_grad(m.id);
            grads_[m.id] += grads_[out] * values_[s.id](0, 0);
        }
        if (needs_grad_[s.id]) {
            ensure_grad(s.id);
            grads_[s.id](0, 0) += grads_[out].cwiseProduct(values_[m.id]).sum();
        }
    };
    return {out};
}

Var Tape::div_scalars(Var a, Var b) {
    double av = values_[a.id](0, 0), bv = values_[b.id](0, 0);
    Mat v(1, 1);
    v(0, 0) = av / bv;
    int out = push(std::move(v), needs_grad_[a.id] || needs_grad_[b.id]);
    backprop_[out] = [this, a, b, out]() {
        double g = grads_[out](0, 0);
        double av2 = values_[a.id](0, 0), bv2 = values_[b.id](0, 0);
        if (needs_grad_[a.id]) { ensure_grad(a.id); grads_[a.id](0, 0) += g / bv2; }
        if (needs_grad_[b.id]) { ensure_grad(b.id); grads_[b.id](0, 0) -= g * av2 / (bv2 * bv2); }
    };
    return {out};
}

Var Tape::sigmoid(Var a) {
    Mat v = (1.0 / (1.0 + (-values_[a.id].array()).exp())).matrix();
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            const auto& y = values_[out].array();
            grads_[a.id].array() += grads_[out].array() * y * (1.0 - y);
        };
    return {out};
}

Var Tape::tanh(Var a) {
    Mat v = values_[a.id].array().tanh().matrix();
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            const auto& y = values_[out].array();
            grads_[a.id].array() += grads_[out].array() * (1.0 - y * y);
        };
    return {out};
}

Var Tape::relu(Var a) {
    Mat v = values_[a.id].cwiseMax(0.0);
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            grads_[a.id].array() +=
                grads_[out].array() * (values_[a.id].array() > 0.0).cast<double>();
        };
    return {out};
}

Var Tape::softplus(Var a) {
    // log(1+exp(x)) = max(x,0) + log1p(exp(-|x|))
    Mat v = values_[a.id].unaryExpr([](double x) {
        return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    });
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            grads_[a.id].array() +=
                grads_[out].array() / (1.0 + (-values_[a.id].array()).exp());
        };
    return {out};
}

Var Tape::square(Var a) {
    Mat v = values_[a.id].array().square().matrix();
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            grads_[a.id].array() += 2.0 * grads_[out].array() * values_[a.id].array();
        };
    return {out};
}

Var Tape::matmul(Var a, Var b) {
    Mat v = values_[a.id] * values_[b.id];
    int out = push(std::move(v), needs_grad_[a.id] || needs_grad_[b.id]);
    backprop_[out] = [this, a, b, out]() {
        if (needs_grad_[a.id]) {
            ensure_grad(a.id);
            grads_[a.id] += grads_[out] * values_[b.id].transpose();
        }
        if (needs_grad_[b.id]) {
            ensure_grad(b.id);
            grads_[b.id] += values_[a.id].transpose() * grads_[out];
        }
    };
    return {out};
}

Var Tape::transpose(Var a) {
    Mat v = values_[a.id].transpose();
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            grads_[a.id] += grads_[out].transpose();
        };
    return {out};
}

Var Tape::sum_all(Var a) {
    Mat v(1, 1);
    v(0, 0) = values_[a.id].sum();
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            grads_[a.id].array() += grads_[out](0, 0);
        };
    return {out};
}

Var Tape::rowwise_sum(Var a) {
    Mat v = values_[a.id].rowwise().sum();
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            grads_[a.id].colwise() += grads_[out].col(0);
        };
    return {out};
}

Var Tape::rows(Var a, int start, int count) {
    Mat v = values_[a.id].middleRows(start, count);
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out, start, count]() {
            ensure_grad(a.id);
            grads_[a.id].middleRows(start, count) += grads_[out];
        };
    return {out};
}

Var Tape::cols(Var a, int start, int count) {
    Mat v = values_[a.id].middleCols(start, count);
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out, start, count]() {
            ensure_grad(a.id);
            grads_[a.id].middleCols(start, count) += grads_[out];
        };
    return {out};
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error("concat_rows: empty");
    Eigen::Index total = 0;
    const Eigen::Index c = values_[parts[0].id].cols();
    bool any_grad = false;
    for (Var p : parts) {
        total += values_[p.id].rows();
        any_grad = any_grad || needs_grad_[p.id];
    }
    Mat v(total, c);
    Eigen::Index at = 0;
    for (Var p : parts) {
        v.middleRows(at, values_[p.id].rows()) = values_[p.id];
        at += values_[p.id].rows();
    }
    int out = push(std::move(v), any_grad);
    if (any_grad)
        backprop_[out] = [this, parts, out]() {
            Eigen::Index at2 = 0;
            for (Var p : parts) {
                Eigen::Index r = values_[p.id].rows();
                if (needs_grad_[p.id]) {
                    ensure_grad(p.id);
                    grads_[p.id] += grads_[out].middleRows(at2, r);
                }
                at2 += r;
            }
        };
    return {out};
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw Error("concat_cols: empty");
    Eigen::Index total = 0;
    const Eigen::Index r = values_[parts[0].id].rows();
    bool any_grad = false;
    for (Var p : parts) {
        total += values_[p.id].cols();
        any_grad = any_grad || needs_grad_[p.id];
    }
    Mat v(r, total);
    Eigen::Index at = 0;
    for (Var p : parts) {
        v.middleCols(at, values_[p.id].cols()) = values_[p.id];
        at += values_[p.id].cols();
    }
    int out = push(std::move(v), any_grad);
    if (any_grad)
        backprop_[out] = [this, parts, out]() {
            Eigen::Index at2 = 0;
            for (Var p : parts) {
                Eigen::Index c = values_[p.id].cols();
                if (needs_grad_[p.id]) {
                    ensure_grad(p.id);
                    grads_[p.id] += grads_[out].middleCols(at2, c);
                }
                at2 += c;
            }
        };
    return {out};
}

Var Tape::softmax_rows(Var a) {
    const Mat& x = values_[a.id];
    Mat v(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::ArrayXd e = (x.row(i).array() - x.row(i).maxCoeff()).exp();
        v.row(i) = (e / e.sum()).matrix();
    }
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            const Mat& y = values_[out];
            const Mat& gy = grads_[out];
            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                double dot = gy.row(i).dot(y.row(i));
                grads_[a.id].row(i).array() +=
                    (gy.row(i).array() - dot) * y.row(i).array();
            }
        };
    return {out};
}

Var Tape::logsumexp_rows(Var a) {
    const Mat& x = values_[a.id];
    Mat v(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double m = x.row(i).maxCoeff();
        v(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
    }
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out]() {
            ensure_grad(a.id);
            const Mat& x2 = values_[a.id];
            const Mat& l = values_[out];
            for (Eigen::Index i = 0; i < x2.rows(); ++i)
                grads_[a.id].row(i).array() +=
                    grads_[out](i, 0) * (x2.row(i).array() - l(i, 0)).exp();
        };
    return {out};
}

Var Tape::softmax_vec(Var a) {
    if (values_[a.id].cols() != 1) throw Error("softmax_vec expects (n,1)");
    Var t = transpose(a);
    return transpose(softmax_rows(t));
}

Var Tape::layernorm_rows(Var a, double eps) {
    const Mat& x = values_[a.id];
    const double n = static_cast<double>(x.cols());
    Mat v(x.rows(), x.cols());
    Vec inv_std(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double mu = x.row(i).mean();
        double var = (x.row(i).array() - mu).square().sum() / n;
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        v.row(i) = ((x.row(i).array() - mu) * inv_std(i)).matrix();
    }
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out, inv_std, n]() {
            ensure_grad(a.id);
            const Mat& y = values_[out];
            const Mat& gy = grads_[out];
            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                double gmean = gy.row(i).mean();
                double gy_dot_y = gy.row(i).dot(y.row(i)) / n;
                grads_[a.id].row(i).array() +=
                    inv_std(i) *
                    (gy.row(i).array() - gmean - y.row(i).array() * gy_dot_y);
            }
        };
    return {out};
}

Var Tape::gather_rows(Var a, const std::vector<int>& indices) {
    const Mat& x = values_[a.id];
    Mat v(static_cast<Eigen::Index>(indices.size()), x.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] < 0)
            v.row(static_cast<Eigen::Index>(i)).setZero();
        else
            v.row(static_cast<Eigen::Index>(i)) = x.row(indices[i]);
    }
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out, indices]() {
            ensure_grad(a.id);
            for (std::size_t i = 0; i < indices.size(); ++i)
                if (indices[i] >= 0)
                    grads_[a.id].row(indices[i]) +=
                        grads_[out].row(static_cast<Eigen::Index>(i));
        };
    return {out};
}

Var Tape::regroup_rows(Var a, int group) {
    const Mat& x = values_[a.id];
    if (x.rows() % group != 0) throw Error("regroup_rows: rows not divisible by group");
    const Eigen::Index n = x.rows() / group;
    const Eigen::Index c = x.cols();
    Mat v(n, group * c);
    for (Eigen::Index i = 0; i < n; ++i)
        for (int g = 0; g < group; ++g)
            v.block(i, g * c, 1, c) = x.row(i * group + g);
    int out = push(std::move(v), needs_grad_[a.id]);
    if (needs_grad_[a.id])
        backprop_[out] = [this, a, out, group, n, c]() {
            ensure_grad(a.id);
            for (Eigen::Index i = 0; i < n; ++i)
                for (int g = 0; g < group; ++g)
                    grads_[a.id].row(i * group + g) +=
                        grads_[out].block(i, g * c, 1, c);
        };
    return {out};
}

} // namespace smm::ad
