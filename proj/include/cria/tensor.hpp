#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

// Dense float64 tensors with tape-based reverse-mode differentiation.
// The graph is rebuilt every step; a tape is confined to one thread.

namespace cria {

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct AutodiffError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    std::vector<double> grad;  // sized lazily, same length as data
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

std::string shape_str(const std::vector<int>& shape);
std::size_t numel(const std::vector<int>& shape);

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);  // zero-filled
    Tensor(std::vector<int> shape, std::vector<double> data);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    bool defined() const { return impl != nullptr; }
    const std::vector<int>& shape() const { return impl->shape; }
    int rank() const { return static_cast<int>(impl->shape.size()); }
    std::size_t size() const { return impl->data.size(); }
    int rows() const { return impl->shape.at(0); }
    int cols() const { return impl->shape.at(1); }

    std::vector<double>& data() { return impl->data; }
    const std::vector<double>& data() const { return impl->data; }
    double item() const;

    bool requires_grad() const { return impl->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        impl->requires_grad = v;
        return *this;
    }
    const std::vector<double>& grad() const;
    void zero_grad() {
        if (impl) impl->grad.assign(impl->data.size(), 0.0);
    }

    std::shared_ptr<TensorImpl> impl;
};

class Tape {
public:
    void record(std::function<void()> backward_fn) { nodes_.push_back(std::move(backward_fn)); }
    std::size_t size() const { return nodes_.size(); }
    void run_backward_and_clear() {
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        nodes_.clear();
    }

    static Tape* current();

    // RAII activation for the calling thread.
    class Scope {
    public:
        explicit Scope(Tape& t);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    // Temporarily disables recording (forward-only evaluation).
    class Pause {
    public:
        Pause();
        ~Pause();
        Pause(const Pause&) = delete;
        Pause& operator=(const Pause&) = delete;

    private:
        Tape* prev_;
    };

private:
    std::vector<std::function<void()>> nodes_;
};

// ---- arithmetic ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor add_rowvec(const Tensor& x, const Tensor& v);       // x: RxC, v: C
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);              // elementwise, same shape
Tensor div_rows(const Tensor& a, const Tensor& s);         // a: RxC, s: Rx1
Tensor scale(const Tensor& a, double s);
Tensor add_const(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor abs_t(const Tensor& a);
Tensor square(const Tensor& a);
Tensor elu(const Tensor& a);  // alpha = 1
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor pow_const(const Tensor& a, double p);

// ---- shape plumbing ----
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor slice_cols(const Tensor& x, int c0, int len);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& x, const std::vector<int>& idx);

// ---- reductions / normalizations ----
Tensor sum(const Tensor& x);                                  // scalar
Tensor row_sums(const Tensor& x);                             // RxC -> Rx1
Tensor col_mean(const Tensor& x);                             // RxC -> 1xC
Tensor softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor l2_normalize_rows(const Tensor& x);

// Rotary encoding over the last axis: row r uses angle positions[r].
// Rotation per complex pair d (1-based): theta = pos * 10000^(-2d/D).
Tensor rope_rows(const Tensor& x, const std::vector<double>& positions);

// Inverted dropout; the sampled mask lives on the tape as a constant,
// so backward is exact for the sampled mask.
class Rng;
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// Post-softmax attention value masking: rows of attn multiplied by the
// 0/1 mask and renormalized; fully-zeroed rows fall back to uniform.
Tensor value_mask_renorm(const Tensor& attn, const std::vector<std::uint8_t>& mask);

// ---- losses ----
// Mean over rows of [logsumexp(row) - row[diag]] for square logit matrices.
Tensor ce_identity(const Tensor& logits);
// Mean over rows of -log softmax(row)[label].
Tensor ce_labels(const Tensor& logits, const std::vector<int>& labels);
// Stabilized binary cross-entropy on logits; labels in {0,1}.
Tensor bce_with_logits(const Tensor& logits, const std::vector<int>& labels);

// ---- reverse pass ----
void backward(const Tensor& loss);

// Max over coordinates of x of the relative disagreement between the
// analytic gradient of f and central differences at step h.
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                               const Tensor& x, double h = 1e-5);

}  // namespace cria
