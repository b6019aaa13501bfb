#pragma once

// Central finite-difference gradient oracle, independent of the autodiff
// path it checks: it only re-runs the forward closure at perturbed inputs.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cmt/tensor.hpp"

namespace cmt::test {

struct FdResult {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
};

/// Compares d(loss)/d(input) for every entry of `inputs` against central
/// differences of `forward` (which must rebuild the whole graph from the
/// current input data and return the scalar loss value).
inline FdResult fd_check(const std::vector<TensorPtr>& inputs,
                         const std::function<double()>& forward_value,
                         const std::function<TensorPtr()>& forward_graph,
                         double eps = 1e-5, double abs_floor = 1e-6) {
    for (auto& in : inputs) in->zero_grad();
    auto loss = forward_graph();
    loss->backward();

    FdResult result;
    for (auto& in : inputs) {
        for (std::size_t i = 0; i < in->size(); ++i) {
            double saved = in->data[i];
            in->data[i] = saved + eps;
            double up = forward_value();
            in->data[i] = saved - eps;
            double down = forward_value();
            in->data[i] = saved;
            double fd = (up - down) / (2.0 * eps);
            double ad = in->grad[i];
            double denom = std::max({std::abs(fd), std::abs(ad), abs_floor});
            double rel = std::abs(fd - ad) / denom;
            if (std::abs(fd - ad) <= abs_floor) rel = 0.0;
            result.max_rel_err = std::max(result.max_rel_err, rel);
            ++result.checked;
        }
    }
    return result;
}

inline TensorPtr random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng,
                               double lo = -2.0, double hi = 2.0,
                               bool requires_grad = true) {
    auto t = Tensor::zeros(std::move(shape), requires_grad);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& v : t->data) v = dist(rng);
    return t;
}

}  // namespace cmt::test
