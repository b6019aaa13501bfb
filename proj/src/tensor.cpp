#include "cmt/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <unordered_set>

namespace cmt {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

#ifndef NDEBUG
void check_finite(const Tensor& t) {
    for (double v : t.data) assert(std::isfinite(v) && "non-finite value in tensor");
}
#else
void check_finite(const Tensor&) {}
#endif

void require_same_shape(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) throw std::invalid_argument("tensor shape mismatch");
}

}  // namespace

TensorPtr Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    std::size_t n = shape_product(shape);
    t->shape = std::move(shape);
    t->data.assign(n, 0.0);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::from_values(std::vector<std::size_t> shape,
                              std::vector<double> values, bool requires_grad) {
    auto t = std::make_shared<Tensor>();
    if (shape_product(shape) != values.size())
        throw std::invalid_argument("value count does not match shape");
    t->shape = std::move(shape);
    t->data = std::move(values);
    t->requires_grad = requires_grad;
    return t;
}

TensorPtr Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
    if (shape.size() != 2) throw std::invalid_argument("rows() requires rank-2 tensor");
    return shape[0];
}

std::size_t Tensor::cols() const {
    if (shape.size() != 2) throw std::invalid_argument("cols() requires rank-2 tensor");
    return shape[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

void Tensor::zero_grad() { grad.assign(data.size(), 0.0); }

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

void Tensor::set_backward(std::vector<TensorPtr> parents, std::function<void()> fn) {
    parents_ = std::move(parents);
    backward_fn_ = std::move(fn);
}

void Tensor::backward() {
    if (size() != 1) throw std::invalid_argument("backward requires a scalar loss");

    // Iterative post-order DFS; each node visited once.
    std::vector<Tensor*> order;
    std::unordered_set<Tensor*> seen;
    std::vector<std::pair<Tensor*, std::size_t>> stack{{this, 0}};
    seen.insert(this);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents_.size()) {
            Tensor* p = node->parents_[idx++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Tensor* node : order) {
        if (node->backward_fn_) node->zero_grad();  // intermediate: per-sweep
        else node->ensure_grad();                   // leaf: accumulates
    }
    grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn_) (*it)->backward_fn_();
}

namespace {

/// Records the closure only when some input actually participates.
void record(const TensorPtr& out, std::vector<TensorPtr> parents,
            std::function<void()> fn) {
    bool any = false;
    for (const auto& p : parents) any = any || p->needs_grad();
    if (any) out->set_backward(std::move(parents), std::move(fn));
    check_finite(*out);
}

}  // namespace

TensorPtr matmul(const TensorPtr& a, const TensorPtr& b) {
    if (a->shape.size() != 2 || b->shape.size() != 2 || a->cols() != b->rows())
        throw std::invalid_argument("matmul: inner dimensions do not match");
    std::size_t m = a->rows(), k = a->cols(), n = b->cols();
    auto c = Tensor::zeros({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            double av = a->data[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j)
                c->data[i * n + j] += av * b->data[p * n + j];
        }
    record(c, {a, b}, [a, b, c = c.get(), m, k, n] {
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double g = c->grad[i * n + j];
                if (g == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    a->grad[i * k + p] += g * b->data[p * n + j];
                    b->grad[p * n + j] += g * a->data[i * k + p];
                }
            }
    });
    return c;
}

TensorPtr transpose(const TensorPtr& a) {
    std::size_t m = a->rows(), n = a->cols();
    auto t = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            t->data[j * m + i] = a->data[i * n + j];
    record(t, {a}, [a, t = t.get(), m, n] {
        a->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                a->grad[i * n + j] += t->grad[j * m + i];
    });
    return t;
}

TensorPtr add(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b);
    auto c = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < c->size(); ++i) c->data[i] = a->data[i] + b->data[i];
    record(c, {a, b}, [a, b, c = c.get()] {
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < c->size(); ++i) {
            a->grad[i] += c->grad[i];
            b->grad[i] += c->grad[i];
        }
    });
    return c;
}

TensorPtr mul(const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(*a, *b);
    auto c = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < c->size(); ++i) c->data[i] = a->data[i] * b->data[i];
    record(c, {a, b}, [a, b, c = c.get()] {
        a->ensure_grad();
        b->ensure_grad();
        for (std::size_t i = 0; i < c->size(); ++i) {
            a->grad[i] += c->grad[i] * b->data[i];
            b->grad[i] += c->grad[i] * a->data[i];
        }
    });
    return c;
}

TensorPtr scale(const TensorPtr& a, double s) {
    auto c = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < c->size(); ++i) c->data[i] = a->data[i] * s;
    record(c, {a}, [a, c = c.get(), s] {
        a->ensure_grad();
        for (std::size_t i = 0; i < c->size(); ++i) a->grad[i] += c->grad[i] * s;
    });
    return c;
}

TensorPtr add_row_bias(const TensorPtr& a, const TensorPtr& bias) {
    std::size_t m = a->rows(), n = a->cols();
    if (bias->shape != std::vector<std::size_t>{n})
        throw std::invalid_argument("add_row_bias: bias length must equal column count");
    auto c = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c->data[i * n + j] = a->data[i * n + j] + bias->data[j];
    record(c, {a, bias}, [a, bias, c = c.get(), m, n] {
        a->ensure_grad();
        bias->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                a->grad[i * n + j] += c->grad[i * n + j];
                bias->grad[j] += c->grad[i * n + j];
            }
    });
    return c;
}

TensorPtr add_constant(const TensorPtr& a, const std::vector<double>& offset) {
    if (offset.size() != a->size())
        throw std::invalid_argument("add_constant: offset size mismatch");
    auto c = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < c->size(); ++i) c->data[i] = a->data[i] + offset[i];
    record(c, {a}, [a, c = c.get()] {
        a->ensure_grad();
        for (std::size_t i = 0; i < c->size(); ++i) a->grad[i] += c->grad[i];
    });
    return c;
}

TensorPtr softmax_rows(const TensorPtr& a) {
    std::size_t m = a->shape.size() == 2 ? a->rows() : 1;
    std::size_t n = a->shape.size() == 2 ? a->cols() : a->size();
    auto y = Tensor::zeros(a->shape);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = &a->data[i * n];
        double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            y->data[i * n + j] = std::exp(row[j] - mx);
            z += y->data[i * n + j];
        }
        for (std::size_t j = 0; j < n; ++j) y->data[i * n + j] /= z;
    }
    record(y, {a}, [a, y = y.get(), m, n] {
        a->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                dot += y->grad[i * n + j] * y->data[i * n + j];
            for (std::size_t j = 0; j < n; ++j)
                a->grad[i * n + j] +=
                    y->data[i * n + j] * (y->grad[i * n + j] - dot);
        }
    });
    return y;
}

TensorPtr layer_norm(const TensorPtr& x, const TensorPtr& gain,
                     const TensorPtr& bias, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("layer_norm: eps must be positive");
    std::size_t m = x->rows(), n = x->cols();
    if (gain->size() != n || bias->size() != n)
        throw std::invalid_argument("layer_norm: gain/bias length must equal column count");
    auto y = Tensor::zeros(x->shape);
    auto xhat = std::make_shared<std::vector<double>>(m * n);
    auto inv_std = std::make_shared<std::vector<double>>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += x->data[i * n + j];
        mean /= double(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            double d = x->data[i * n + j] - mean;
            var += d * d;
        }
        var /= double(n);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (std::size_t j = 0; j < n; ++j) {
            double h = (x->data[i * n + j] - mean) * is;
            (*xhat)[i * n + j] = h;
            y->data[i * n + j] = h * gain->data[j] + bias->data[j];
        }
    }
    record(y, {x, gain, bias}, [x, gain, bias, y = y.get(), xhat, inv_std, m, n] {
        x->ensure_grad();
        gain->ensure_grad();
        bias->ensure_grad();
        for (std::size_t i = 0; i < m; ++i) {
            double sum_dh = 0.0, sum_dh_h = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double dy = y->grad[i * n + j];
                double h = (*xhat)[i * n + j];
                gain->grad[j] += dy * h;
                bias->grad[j] += dy;
                double dh = dy * gain->data[j];
                sum_dh += dh;
                sum_dh_h += dh * h;
            }
            for (std::size_t j = 0; j < n; ++j) {
                double dh = y->grad[i * n + j] * gain->data[j];
                double h = (*xhat)[i * n + j];
                x->grad[i * n + j] += (*inv_std)[i] *
                    (dh - sum_dh / double(n) - h * sum_dh_h / double(n));
            }
        }
    });
    return y;
}

TensorPtr gelu(const TensorPtr& x) {
    static const double k = std::sqrt(2.0 / M_PI);
    static const double a3 = 0.044715;
    auto y = Tensor::zeros(x->shape);
    for (std::size_t i = 0; i < x->size(); ++i) {
        double v = x->data[i];
        y->data[i] = 0.5 * v * (1.0 + std::tanh(k * (v + a3 * v * v * v)));
    }
    record(y, {x}, [x, y = y.get()] {
        x->ensure_grad();
        for (std::size_t i = 0; i < x->size(); ++i) {
            double v = x->data[i];
            double u = k * (v + a3 * v * v * v);
            double t = std::tanh(u);
            double du = k * (1.0 + 3.0 * a3 * v * v);
            x->grad[i] += y->grad[i] *
                (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du);
        }
    });
    return y;
}

TensorPtr cross_entropy(const TensorPtr& logits, const std::vector<int>& targets,
                        int ignore_index) {
    std::size_t m = logits->rows(), n = logits->cols();
    if (targets.size() != m)
        throw std::invalid_argument("cross_entropy: one target per row required");
    std::size_t count = 0;
    double total = 0.0;
    auto probs = std::make_shared<std::vector<double>>(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        int t = targets[i];
        if (t == ignore_index) continue;
        if (t < 0 || std::size_t(t) >= n)
            throw std::invalid_argument("cross_entropy: target class out of range");
        const double* row = &logits->data[i * n];
        double mx = *std::max_element(row, row + n);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < n; ++j)
            (*probs)[i * n + j] = std::exp(row[j] - mx) / z;
        total += std::log(z) + mx - row[t];
        ++count;
    }
    // All targets ignored: loss 0 with zero gradient, still on the graph.
    auto loss = Tensor::scalar(count ? total / double(count) : 0.0);
    record(loss, {logits}, [logits, loss = loss.get(), probs, targets, ignore_index, count, m, n] {
        logits->ensure_grad();
        if (count == 0) return;
        double g = loss->grad[0] / double(count);
        for (std::size_t i = 0; i < m; ++i) {
            if (targets[i] == ignore_index) continue;
            for (std::size_t j = 0; j < n; ++j)
                logits->grad[i * n + j] += g * (*probs)[i * n + j];
            logits->grad[i * n + std::size_t(targets[i])] -= g;
        }
    });
    return loss;
}

TensorPtr sum(const TensorPtr& a) {
    auto s = Tensor::scalar(std::accumulate(a->data.begin(), a->data.end(), 0.0));
    record(s, {a}, [a, s = s.get()] {
        a->ensure_grad();
        for (std::size_t i = 0; i < a->size(); ++i) a->grad[i] += s->grad[0];
    });
    return s;
}

TensorPtr slice_cols(const TensorPtr& a, std::size_t start, std::size_t count) {
    std::size_t m = a->rows(), n = a->cols();
    if (start + count > n) throw std::invalid_argument("slice_cols: out of range");
    auto c = Tensor::zeros({m, count});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j)
            c->data[i * count + j] = a->data[i * n + start + j];
    record(c, {a}, [a, c = c.get(), start, count, m, n] {
        a->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < count; ++j)
                a->grad[i * n + start + j] += c->grad[i * count + j];
    });
    return c;
}

TensorPtr concat_cols(const std::vector<TensorPtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no parts");
    std::size_t m = parts[0]->rows(), n = 0;
    for (const auto& p : parts) {
        if (p->rows() != m) throw std::invalid_argument("concat_cols: row mismatch");
        n += p->cols();
    }
    auto c = Tensor::zeros({m, n});
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::size_t pn = p->cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pn; ++j)
                c->data[i * n + off + j] = p->data[i * pn + j];
        off += pn;
    }
    record(c, {parts.begin(), parts.end()}, [parts, c = c.get(), m, n] {
        std::size_t off = 0;
        for (const auto& p : parts) {
            p->ensure_grad();
            std::size_t pn = p->cols();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < pn; ++j)
                    p->grad[i * pn + j] += c->grad[i * n + off + j];
            off += pn;
        }
    });
    return c;
}

TensorPtr rows_gather(const TensorPtr& table, const std::vector<int>& ids) {
    std::size_t n = table->cols();
    auto out = Tensor::zeros({ids.size(), n});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || std::size_t(ids[i]) >= table->rows())
            throw std::invalid_argument("rows_gather: index out of range");
        std::copy_n(&table->data[std::size_t(ids[i]) * n], n, &out->data[i * n]);
    }
    record(out, {table}, [table, out = out.get(), ids, n] {
        table->ensure_grad();
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < n; ++j)
                table->grad[std::size_t(ids[i]) * n + j] += out->grad[i * n + j];
    });
    return out;
}

TensorPtr pick_row(const TensorPtr& a, std::size_t row) {
    std::size_t n = a->cols();
    if (row >= a->rows()) throw std::invalid_argument("pick_row: out of range");
    auto out = Tensor::zeros({1, n});
    std::copy_n(&a->data[row * n], n, out->data.begin());
    record(out, {a}, [a, out = out.get(), row, n] {
        a->ensure_grad();
        for (std::size_t j = 0; j < n; ++j) a->grad[row * n + j] += out->grad[j];
    });
    return out;
}

}  // namespace cmt
