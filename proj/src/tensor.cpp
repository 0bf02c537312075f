#include "desate/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <sstream>

#include "desate/error.hpp"
#include "desate/kernels.hpp"

namespace desate {

std::string Shape::str() const {
    std::ostringstream os;
    os << '[' << rows << " x " << cols << ']';
    return os.str();
}

double* detail::TensorData::ensure_grad() {
    if (grad.empty()) grad.assign(values.size(), 0.0);
    return grad.data();
}

Tensor make_tensor(Shape shape, std::vector<double> values) {
    if (shape.rows == 0 || shape.cols == 0)
        throw DimensionError("tensor dimensions must be positive, got " + shape.str());
    if (values.size() != shape.size())
        throw DimensionError("tensor of shape " + shape.str() + " given " +
                             std::to_string(values.size()) + " values");
    auto d = std::make_shared<detail::TensorData>();
    d->shape = shape;
    d->values = std::move(values);
    return Tensor(std::move(d));
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return filled(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::filled(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
    Tensor t = make_tensor({rows, cols}, std::vector<double>(rows * cols, value));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
    Tensor t = make_tensor({rows, cols}, std::move(values));
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return filled(1, 1, value, requires_grad); }

Tensor Tensor::identity(std::size_t n, bool requires_grad) {
    Tensor t = zeros(n, n, requires_grad);
    for (std::size_t i = 0; i < n; ++i) t.mutable_values()[i * n + i] = 1.0;
    return t;
}

Tensor Tensor::parameter(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::vector<double> v(rows * cols);
    for (double& x : v) x = bound * (2.0 * uniform01(rng) - 1.0);
    return from(rows, cols, std::move(v), true);
}

double Tensor::item() const {
    if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape().str());
    return data_->values[0];
}

std::span<const double> Tensor::grad() const {
    if (data_->grad.empty()) data_->grad.assign(data_->values.size(), 0.0);
    return data_->grad;
}

std::span<double> Tensor::mutable_grad() {
    data_->ensure_grad();
    return data_->grad;
}

void Tensor::zero_grad() {
    if (!data_->grad.empty()) std::fill(data_->grad.begin(), data_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return make_tensor(shape(), data_->values); }

// ---- tape -----------------------------------------------------------------

namespace {
thread_local Tape* g_current_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_current_tape) { g_current_tape = &tape; }
Tape::Scope::~Scope() { g_current_tape = previous_; }

Tape* Tape::current() noexcept { return g_current_tape; }

void Tape::record(const Tensor& output, std::function<void()> backward_fn) {
    output.data().requires_grad = true;
    output.data().tape = this;
    nodes_.push_back({output.handle(), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward() requires a scalar loss, got " +
                            (loss.defined() ? loss.shape().str() : std::string("undefined")));
    if (loss.data().tape != this)
        throw ContractError("backward() loss was not recorded on this tape");
    loss.data().ensure_grad()[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;  // no path to the loss
        it->backward();
    }
    nodes_.clear();
}

// ---- ops ------------------------------------------------------------------

namespace {

using Data = std::shared_ptr<detail::TensorData>;

Tape* tracking(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = Tape::current();
    if (!tape) return nullptr;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return tape;
    return nullptr;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                             b.shape().str());
}

Tensor empty_like(Shape s) { return make_tensor(s, std::vector<double>(s.size())); }

// g -> accumulate into input's gradient buffer with an elementwise factor.
template <typename F>
void accumulate_each(const Data& in, const Data& out, F&& factor) {
    if (!in->requires_grad) return;
    double* gi = in->ensure_grad();
    const double* go = out->grad.data();
    for (std::size_t i = 0; i < in->values.size(); ++i) gi[i] += go[i] * factor(i);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree " + a.shape().str() + " * " +
                             b.shape().str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = empty_like({m, n});
    const auto& kt = kernels::active();
    kt.gemm_nn(m, n, k, a.values().data(), k, b.values().data(), n, out.mutable_values().data(), n,
               false);
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [ad = a.handle(), bd = b.handle(), od = out.handle(), m, k, n] {
            const auto& kt = kernels::active();
            const double* g = od->grad.data();
            if (ad->requires_grad)
                kt.gemm_nt(m, k, n, g, n, bd->values.data(), n, ad->ensure_grad(), k, true);
            if (bd->requires_grad)
                kt.gemm_tn(k, n, m, ad->values.data(), k, g, n, bd->ensure_grad(), n, true);
        });
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = empty_like({n, m});
    auto o = out.mutable_values();
    auto v = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) o[j * m + i] = v[i * n + j];
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle(), m, n] {
            double* ga = ad->ensure_grad();
            const double* g = od->grad.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] + b.values()[i];
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [ad = a.handle(), bd = b.handle(), od = out.handle()] {
            accumulate_each(ad, od, [](std::size_t) { return 1.0; });
            accumulate_each(bd, od, [](std::size_t) { return 1.0; });
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] - b.values()[i];
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [ad = a.handle(), bd = b.handle(), od = out.handle()] {
            accumulate_each(ad, od, [](std::size_t) { return 1.0; });
            accumulate_each(bd, od, [](std::size_t) { return -1.0; });
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] * b.values()[i];
    if (Tape* tape = tracking({&a, &b})) {
        tape->record(out, [ad = a.handle(), bd = b.handle(), od = out.handle()] {
            accumulate_each(ad, od, [&](std::size_t i) { return bd->values[i]; });
            accumulate_each(bd, od, [&](std::size_t i) { return ad->values[i]; });
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] * s;
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle(), s] {
            accumulate_each(ad, od, [s](std::size_t) { return s; });
        });
    }
    return out;
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw DimensionError("add_row: cannot broadcast " + row.shape().str() + " over " +
                             a.shape().str());
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) o[i * n + j] = a.values()[i * n + j] + row.values()[j];
    if (Tape* tape = tracking({&a, &row})) {
        tape->record(out, [ad = a.handle(), rd = row.handle(), od = out.handle(), m, n] {
            accumulate_each(ad, od, [](std::size_t) { return 1.0; });
            if (rd->requires_grad) {
                double* gr = rd->ensure_grad();
                const double* g = od->grad.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
            }
        });
    }
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = std::max(a.values()[i], 0.0);
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle()] {
            accumulate_each(ad, od, [&](std::size_t i) { return ad->values[i] > 0.0 ? 1.0 : 0.0; });
        });
    }
    return out;
}

Tensor square(const Tensor& a) {
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.values()[i] * a.values()[i];
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle()] {
            accumulate_each(ad, od, [&](std::size_t i) { return 2.0 * ad->values[i]; });
        });
    }
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out = empty_like(a.shape());
    auto o = out.mutable_values();
    auto v = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = v.data() + i * n;
        double* y = o.data() + i * n;
        const double mx = *std::max_element(row, row + n);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) total += (y[j] = std::exp(row[j] - mx));
        for (std::size_t j = 0; j < n; ++j) y[j] /= total;
    }
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle(), m, n] {
            double* ga = ad->ensure_grad();
            const double* g = od->grad.data();
            const double* y = od->values.data();
            for (std::size_t i = 0; i < m; ++i) {
                double inner = 0.0;
                for (std::size_t j = 0; j < n; ++j) inner += g[i * n + j] * y[i * n + j];
                for (std::size_t j = 0; j < n; ++j)
                    ga[i * n + j] += y[i * n + j] * (g[i * n + j] - inner);
            }
        });
    }
    return out;
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x;
    Tensor out = Tensor::scalar(s);
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle()] {
            const double g = od->grad[0];
            double* ga = ad->ensure_grad();
            for (std::size_t i = 0; i < ad->values.size(); ++i) ga[i] += g;
        });
    }
    return out;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum_squares(const Tensor& a) {
    double s = 0.0;
    for (double x : a.values()) s += x * x;
    Tensor out = Tensor::scalar(s);
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle()] {
            const double g = od->grad[0];
            double* ga = ad->ensure_grad();
            for (std::size_t i = 0; i < ad->values.size(); ++i) ga[i] += 2.0 * g * ad->values[i];
        });
    }
    return out;
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
    if (rows * cols != a.size())
        throw DimensionError("reshape: cannot view " + a.shape().str() + " as " +
                             Shape{rows, cols}.str());
    Tensor out = make_tensor({rows, cols}, std::vector<double>(a.values().begin(), a.values().end()));
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle()] {
            accumulate_each(ad, od, [](std::size_t) { return 1.0; });
        });
    }
    return out;
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    if (begin >= end || end > a.rows())
        throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") out of range for " + a.shape().str());
    const std::size_t n = a.cols();
    auto v = a.values();
    Tensor out = make_tensor({end - begin, n},
                             std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin * n),
                                                 v.begin() + static_cast<std::ptrdiff_t>(end * n)));
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle(), begin, n] {
            double* ga = ad->ensure_grad() + begin * n;
            for (std::size_t i = 0; i < od->grad.size(); ++i) ga[i] += od->grad[i];
        });
    }
    return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    if (begin >= end || end > a.cols())
        throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                             ") out of range for " + a.shape().str());
    const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
    Tensor out = empty_like({m, w});
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) o[i * w + j] = a.values()[i * n + begin + j];
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle(), m, n, w, begin] {
            double* ga = ad->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < w; ++j) ga[i * n + begin + j] += od->grad[i * w + j];
        });
    }
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const std::size_t m = parts.front().rows();
    std::size_t n = 0;
    for (const Tensor& p : parts) {
        if (p.rows() != m)
            throw DimensionError("concat_cols: row mismatch " + p.shape().str() + " vs " +
                                 parts.front().shape().str());
        n += p.cols();
    }
    Tensor out = empty_like({m, n});
    auto o = out.mutable_values();
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < p.cols(); ++j) o[i * n + offset + j] = p(i, j);
        offset += p.cols();
    }
    Tape* tape = Tape::current();
    bool any = false;
    for (const Tensor& p : parts) any = any || p.requires_grad();
    if (tape && any) {
        std::vector<Data> handles;
        for (const Tensor& p : parts) handles.push_back(p.handle());
        tape->record(out, [handles = std::move(handles), od = out.handle(), m, n] {
            std::size_t off = 0;
            for (const Data& p : handles) {
                const std::size_t w = p->shape.cols;
                if (p->requires_grad) {
                    double* gp = p->ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += od->grad[i * n + off + j];
                }
                off += w;
            }
        });
    }
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t n = parts.front().cols();
    std::vector<double> values;
    std::size_t m = 0;
    for (const Tensor& p : parts) {
        if (p.cols() != n)
            throw DimensionError("concat_rows: column mismatch " + p.shape().str() + " vs " +
                                 parts.front().shape().str());
        values.insert(values.end(), p.values().begin(), p.values().end());
        m += p.rows();
    }
    Tensor out = make_tensor({m, n}, std::move(values));
    Tape* tape = Tape::current();
    bool any = false;
    for (const Tensor& p : parts) any = any || p.requires_grad();
    if (tape && any) {
        std::vector<Data> handles;
        for (const Tensor& p : parts) handles.push_back(p.handle());
        tape->record(out, [handles = std::move(handles), od = out.handle()] {
            std::size_t off = 0;
            for (const Data& p : handles) {
                const std::size_t len = p->values.size();
                if (p->requires_grad) {
                    double* gp = p->ensure_grad();
                    for (std::size_t i = 0; i < len; ++i) gp[i] += od->grad[off + i];
                }
                off += len;
            }
        });
    }
    return out;
}

Tensor select_rows(const Tensor& a, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw DimensionError("select_rows: no indices");
    const std::size_t n = a.cols();
    std::vector<double> values;
    values.reserve(indices.size() * n);
    for (std::size_t r : indices) {
        if (r >= a.rows())
            throw DimensionError("select_rows: row " + std::to_string(r) + " out of range for " +
                                 a.shape().str());
        values.insert(values.end(), a.values().begin() + static_cast<std::ptrdiff_t>(r * n),
                      a.values().begin() + static_cast<std::ptrdiff_t>((r + 1) * n));
    }
    Tensor out = make_tensor({indices.size(), n}, std::move(values));
    if (Tape* tape = tracking({&a})) {
        tape->record(out, [ad = a.handle(), od = out.handle(), indices, n] {
            double* ga = ad->ensure_grad();
            for (std::size_t i = 0; i < indices.size(); ++i)
                for (std::size_t j = 0; j < n; ++j) ga[indices[i] * n + j] += od->grad[i * n + j];
        });
    }
    return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    const std::size_t m = x.rows(), n = x.cols();
    if (gain.shape() != Shape{1, n} || bias.shape() != Shape{1, n})
        throw DimensionError("layer_norm_rows: gain/bias must be [1 x " + std::to_string(n) +
                             "], got " + gain.shape().str() + " and " + bias.shape().str());
    Tensor out = empty_like(x.shape());
    std::vector<double> xhat(m * n), rstd(m);
    auto o = out.mutable_values();
    auto v = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += v[i * n + j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) var += (v[i * n + j] - mu) * (v[i * n + j] - mu);
        var /= static_cast<double>(n);
        rstd[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (v[i * n + j] - mu) * rstd[i];
            o[i * n + j] = xhat[i * n + j] * gain.values()[j] + bias.values()[j];
        }
    }
    if (Tape* tape = tracking({&x, &gain, &bias})) {
        tape->record(out, [xd = x.handle(), gd = gain.handle(), bd = bias.handle(),
                           od = out.handle(), xhat = std::move(xhat), rstd = std::move(rstd), m, n] {
            const double* g = od->grad.data();
            if (gd->requires_grad) {
                double* gg = gd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gg[j] += g[i * n + j] * xhat[i * n + j];
            }
            if (bd->requires_grad) {
                double* gb = bd->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
            if (xd->requires_grad) {
                double* gx = xd->ensure_grad();
                const double inv_n = 1.0 / static_cast<double>(n);
                for (std::size_t i = 0; i < m; ++i) {
                    double mean_d = 0.0, mean_dx = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * gd->values[j];
                        mean_d += d;
                        mean_dx += d * xhat[i * n + j];
                    }
                    mean_d *= inv_n;
                    mean_dx *= inv_n;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double d = g[i * n + j] * gd->values[j];
                        gx[i * n + j] += rstd[i] * (d - mean_d - xhat[i * n + j] * mean_dx);
                    }
                }
            }
        });
    }
    return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng) {
    if (p < 0.0 || p >= 1.0) throw ConfigError("dropout probability must lie in [0, 1)");
    if (p == 0.0) return x;
    const double keep = 1.0 - p;
    std::vector<double> mask(x.size());
    for (double& mk : mask) mk = uniform01(rng) < keep ? 1.0 / keep : 0.0;
    Tensor out = empty_like(x.shape());
    auto o = out.mutable_values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x.values()[i] * mask[i];
    if (Tape* tape = tracking({&x})) {
        tape->record(out, [xd = x.handle(), od = out.handle(), mask = std::move(mask)] {
            accumulate_each(xd, od, [&](std::size_t i) { return mask[i]; });
        });
    }
    return out;
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
    if (q.cols() != k.cols() || q.cols() == 0)
        throw DimensionError("attention: query/key widths differ " + q.shape().str() + " vs " +
                             k.shape().str());
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    return softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_dk));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (k.rows() != v.rows())
        throw DimensionError("attention: key/value lengths differ " + k.shape().str() + " vs " +
                             v.shape().str());
    return matmul(attention_weights(q, k), v);
}

Tensor block_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t block_len,
                       std::size_t heads) {
    if (q.shape() != k.shape() || q.shape() != v.shape())
        throw DimensionError("block_attention: q/k/v shapes differ " + q.shape().str() + ", " +
                             k.shape().str() + ", " + v.shape().str());
    const std::size_t rows = q.rows(), d = q.cols();
    if (block_len == 0 || rows % block_len != 0)
        throw DimensionError("block_attention: " + std::to_string(rows) +
                             " rows not divisible into blocks of " + std::to_string(block_len));
    if (heads == 0 || d % heads != 0)
        throw DimensionError("block_attention: width " + std::to_string(d) +
                             " not divisible by " + std::to_string(heads) + " heads");
    const std::size_t blocks = rows / block_len, dk = d / heads, L = block_len;
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    const auto& kt = kernels::active();

    Tensor out = empty_like(q.shape());
    std::vector<double> probs(blocks * heads * L * L);
    const double* qv = q.values().data();
    const double* kv = k.values().data();
    const double* vv = v.values().data();
    double* ov = out.mutable_values().data();
    for (std::size_t b = 0; b < blocks; ++b) {
        for (std::size_t h = 0; h < heads; ++h) {
            const std::size_t off = b * L * d + h * dk;
            double* p = probs.data() + (b * heads + h) * L * L;
            kt.gemm_nt(L, L, dk, qv + off, d, kv + off, d, p, L, false);
            for (std::size_t i = 0; i < L; ++i) {
                double* row = p + i * L;
                double mx = row[0] * inv_sqrt_dk;
                for (std::size_t j = 0; j < L; ++j) mx = std::max(mx, row[j] * inv_sqrt_dk);
                double total = 0.0;
                for (std::size_t j = 0; j < L; ++j) total += (row[j] = std::exp(row[j] * inv_sqrt_dk - mx));
                for (std::size_t j = 0; j < L; ++j) row[j] /= total;
            }
            kt.gemm_nn(L, dk, L, p, L, vv + off, d, ov + off, d, false);
        }
    }

    if (Tape* tape = tracking({&q, &k, &v})) {
        tape->record(out, [qd = q.handle(), kd = k.handle(), vd = v.handle(), od = out.handle(),
                           probs = std::move(probs), blocks, heads, L, d, dk, inv_sqrt_dk] {
            const auto& kt = kernels::active();
            const double* g = od->grad.data();
            double* gq = qd->requires_grad ? qd->ensure_grad() : nullptr;
            double* gk = kd->requires_grad ? kd->ensure_grad() : nullptr;
            double* gv = vd->requires_grad ? vd->ensure_grad() : nullptr;
            std::vector<double> dp(L * L);
            for (std::size_t b = 0; b < blocks; ++b) {
                for (std::size_t h = 0; h < heads; ++h) {
                    const std::size_t off = b * L * d + h * dk;
                    const double* p = probs.data() + (b * heads + h) * L * L;
                    if (gv) kt.gemm_tn(L, dk, L, p, L, g + off, d, gv + off, d, true);
                    if (!gq && !gk) continue;
                    kt.gemm_nt(L, L, dk, g + off, d, vd->values.data() + off, d, dp.data(), L, false);
                    for (std::size_t i = 0; i < L; ++i) {
                        double inner = 0.0;
                        for (std::size_t j = 0; j < L; ++j) inner += dp[i * L + j] * p[i * L + j];
                        for (std::size_t j = 0; j < L; ++j)
                            dp[i * L + j] = p[i * L + j] * (dp[i * L + j] - inner) * inv_sqrt_dk;
                    }
                    if (gq) kt.gemm_nn(L, dk, L, dp.data(), L, kd->values.data() + off, d, gq + off, d, true);
                    if (gk) kt.gemm_tn(L, dk, L, dp.data(), L, qd->values.data() + off, d, gk + off, d, true);
                }
            }
        });
    }
    return out;
}

}  // namespace desate
