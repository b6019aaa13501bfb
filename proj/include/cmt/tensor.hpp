#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace cmt {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

/// Dense double-precision tensor (rank 1 or 2) with tape-free reverse-mode
/// autodiff: each op records its parents and a backward closure, and
/// backward() runs the closures in reverse topological order.
class Tensor : public std::enable_shared_from_this<Tensor> {
public:
    std::vector<std::size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;   // empty until backward touches this node
    bool requires_grad = false;

    static TensorPtr zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static TensorPtr from_values(std::vector<std::size_t> shape,
                                 std::vector<double> values,
                                 bool requires_grad = false);
    static TensorPtr scalar(double value, bool requires_grad = false);

    std::size_t size() const { return data.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    void zero_grad();

    /// Reverse-mode sweep from a scalar. Leaf gradients accumulate across
    /// calls until zero_grad(); intermediate gradients are per-sweep.
    void backward();

    /// True if this node participates in gradient computation.
    bool needs_grad() const { return requires_grad || backward_fn_ != nullptr; }

    void set_backward(std::vector<TensorPtr> parents, std::function<void()> fn);
    void ensure_grad();

private:
    std::function<void()> backward_fn_;
    std::vector<TensorPtr> parents_;
};

// ---- forward ops (all record backward rules when an input needs grad) ----

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b);
TensorPtr transpose(const TensorPtr& a);
TensorPtr add(const TensorPtr& a, const TensorPtr& b);
TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(const TensorPtr& a, double c);
/// [m×n] plus a length-n bias broadcast over rows.
TensorPtr add_row_bias(const TensorPtr& a, const TensorPtr& bias);
/// Adds a constant (non-differentiable) same-shape offset, e.g. attention
/// mask logits.
TensorPtr add_constant(const TensorPtr& a, const std::vector<double>& offset);
/// Row-wise softmax with max subtraction.
TensorPtr softmax_rows(const TensorPtr& a);
/// Normalizes each row to zero mean / unit variance, then applies
/// per-column gain and bias.
TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps);
/// tanh-approximation GELU.
TensorPtr gelu(const TensorPtr& x);
/// Mean cross-entropy over rows whose target != ignore_index. All rows
/// ignored yields a constant-zero scalar.
TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets,
                        int ignore_index);
TensorPtr sum(const TensorPtr& a);
TensorPtr slice_cols(const TensorPtr& a, std::size_t start, std::size_t count);
TensorPtr concat_cols(const std::vector<TensorPtr>& parts);
/// Gathers rows of a table by index (embedding lookup); backward scatters.
TensorPtr rows_gather(const TensorPtr& table, const std::vector<int>& ids);
/// Extracts one row as a [1×n] tensor.
TensorPtr pick_row(const TensorPtr& a, std::size_t row);

}  // namespace cmt
