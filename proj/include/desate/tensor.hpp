#pragma once
// Dense 2-D tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap shared handle to row-major double storage. Operations
// executed while a Tape::Scope is active on the current thread, and that
// touch at least one tensor with requires_grad set, are recorded on that tape;
// Tape::backward then walks the records in reverse and accumulates gradients
// into every participating tensor. Outside a scope ops are plain arithmetic.
//
// Scalars are 1x1 and vectors are 1xN row tensors.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "desate/rng.hpp"

namespace desate {

struct Shape {
    std::size_t rows = 0;
    std::size_t cols = 0;

    std::size_t size() const noexcept { return rows * cols; }
    std::string str() const;
    friend bool operator==(const Shape&, const Shape&) = default;
};

class Tape;

namespace detail {
struct TensorData {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first gradient contribution
    bool requires_grad = false;
    const Tape* tape = nullptr;  // producing tape for recorded intermediates

    double* ensure_grad();
};
}  // namespace detail

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor filled(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor identity(std::size_t n, bool requires_grad = false);
    // Trainable parameter, uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    static Tensor parameter(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng);

    bool defined() const noexcept { return static_cast<bool>(data_); }
    const Shape& shape() const { return data_->shape; }
    std::size_t rows() const { return data_->shape.rows; }
    std::size_t cols() const { return data_->shape.cols; }
    std::size_t size() const { return data_->values.size(); }

    std::span<const double> values() const { return data_->values; }
    std::span<double> mutable_values() { return data_->values; }
    double operator()(std::size_t r, std::size_t c) const { return data_->values[r * cols() + c]; }
    double item() const;

    bool requires_grad() const { return data_->requires_grad; }
    void set_requires_grad(bool on) { data_->requires_grad = on; }
    bool has_grad() const { return !data_->grad.empty(); }
    // Zero-filled view when no gradient has been accumulated yet.
    std::span<const double> grad() const;
    std::span<double> mutable_grad();
    void zero_grad();

    // Value copy detached from any tape.
    Tensor detach() const;

    bool same_storage(const Tensor& other) const noexcept { return data_ == other.data_; }

    detail::TensorData& data() const { return *data_; }
    const std::shared_ptr<detail::TensorData>& handle() const { return data_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorData> d) : data_(std::move(d)) {}
    friend Tensor make_tensor(Shape, std::vector<double>);

    std::shared_ptr<detail::TensorData> data_;
};

Tensor make_tensor(Shape shape, std::vector<double> values);

// Ordered record of differentiable ops. One tape per worker thread.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Activates a tape on the calling thread for the lifetime of the scope.
    class Scope {
    public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* previous_;
    };

    static Tape* current() noexcept;

    // Seeds d(loss)/d(loss) = 1, runs every record once in reverse order and
    // clears the tape. Leaf gradients accumulate across calls.
    void backward(const Tensor& loss);
    void clear() noexcept { nodes_.clear(); }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Used by op implementations.
    void record(const Tensor& output, std::function<void()> backward_fn);

private:
    struct Node {
        std::shared_ptr<detail::TensorData> output;
        std::function<void()> backward;
    };
    std::vector<Node> nodes_;
};

// ---- differentiable operations ---------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
// a[m x n] + row[1 x n] broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor relu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_squares(const Tensor& a);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor select_rows(const Tensor& a, const std::vector<std::size_t>& indices);
// Row-wise layer normalization followed by gain/bias (both 1 x cols).
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

// softmax(Q K^T / sqrt(d_k)) composed from primitive ops.
Tensor attention_weights(const Tensor& q, const Tensor& k);
// softmax(Q K^T / sqrt(d_k)) V composed from primitive ops.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Fused scaled dot-product attention over independent row blocks and column
// heads. q, k, v are [blocks*block_len x d] with d % heads == 0; block b and
// head h attend within rows [b*block_len, (b+1)*block_len) and columns
// [h*d/heads, (h+1)*d/heads). Output has the shape of v. Equivalent to
// running attention() per (block, head) and concatenating.
Tensor block_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t block_len,
                       std::size_t heads);

}  // namespace desate
