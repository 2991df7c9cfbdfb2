#pragma once

#include "smm/common.hpp"

#include <functional>
#include <vector>

namespace smm::ad {

// Reverse-mode autodiff over dense matrices. A Tape owns all node values
// and gradients; Var is an opaque handle. Ops append a node plus a backward
// closure; backward() replays closures in reverse creation order.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    // Leaf with gradient tracking (parameters, differentiable inputs).
    Var input(Mat v);
    // Leaf without gradient tracking (data, masks, labels).
    Var constant(Mat v);

    const Mat& value(Var v) const { return values_[v.id]; }
    const Mat& grad(Var v) const { return grads_[v.id]; }
    double scalar(Var v) const;

    // Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
    void backward(Var root);

    // ---- elementwise / broadcast ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);                 // Hadamard
    Var scale(Var a, double s);
    Var add_scalar(Var a, double s);
    Var add_rowvec(Var m, Var r);          // (n,c) + (1,c)
    Var mul_rowvec(Var m, Var r);          // (n,c) .* (1,c)
    Var sub_bcast(Var m, Var s);           // (n,c) - broadcast 1x1
    Var mul_bcast(Var m, Var s);           // (n,c) .* 1x1
    Var div_scalars(Var a, Var b);         // 1x1 / 1x1

    // ---- nonlinearities ----
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var relu(Var a);
    Var softplus(Var a);                   // log(1 + exp(x)), stable
    Var square(Var a);

    // ---- reductions / structure ----
    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var sum_all(Var a);                    // -> 1x1
    Var rowwise_sum(Var a);                // -> (n,1)
    Var rows(Var a, int start, int count);
    Var cols(Var a, int start, int count);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);

    // ---- row-structured softmax / norms ----
    Var softmax_rows(Var a);
    Var logsumexp_rows(Var a);             // -> (n,1)
    Var softmax_vec(Var a);                // (n,1) softmax over the column
    Var layernorm_rows(Var a, double eps = 1e-5);

    // Gather rows by index; index -1 yields a zero row (used for conv
    // padding via im2col). Backward scatter-adds.
    Var gather_rows(Var a, const std::vector<int>& indices);

    // (n*group, c) -> (n, group*c), packing each consecutive run of
    // `group` rows into one row. Completes im2col after gather_rows.
    Var regroup_rows(Var a, int group);

    std::size_t size() const { return values_.size(); }

private:
    int push(Mat v, bool needs_grad);
    void ensure_grad(int id);

    std::vector<Mat> values_;
    std::vector<Mat> grads_;
    std::vector<bool> needs_grad_;
    std::vector<std::function<void()>> backprop_;
};

} // namespace smm::ad
