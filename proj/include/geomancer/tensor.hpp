#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace geomancer {

// Storage precision of a tensor. Values are held as doubles; F32 tensors are
// rounded to float after every public operation so their contents are always
// exactly representable in 32 bits (and serialize losslessly as f32).
enum class DType { F32, F64 };

inline DType promote(DType a, DType b) {
    return (a == DType::F64 || b == DType::F64) ? DType::F64 : DType::F32;
}

namespace detail {

struct TensorNode {
    int rows = 0;
    int cols = 0;
    DType dtype = DType::F64;
    bool requires_grad = false;  // leaf parameter
    bool tracked = false;        // participates in an active tape's graph
    std::vector<double> val;
    std::vector<double> grad;

    std::size_t size() const { return val.size(); }
    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
    }
};

}  // namespace detail

// Dense row-major matrix handle (rank 2; vectors are 1xN or Nx1). Immutable
// after construction except for parameter updates done by the optimizer.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(int rows, int cols, DType dt = DType::F64);
    static Tensor full(int rows, int cols, double v, DType dt = DType::F64);
    static Tensor scalar(double v, DType dt = DType::F64);
    static Tensor from(int rows, int cols, std::vector<double> vals,
                       DType dt = DType::F64);
    // Leaf with requires_grad set; gradients accumulate here on backward().
    static Tensor param(int rows, int cols, std::vector<double> vals,
                        DType dt = DType::F64);

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    std::size_t size() const { return node_->val.size(); }
    DType dtype() const { return node_->dtype; }
    bool requires_grad() const { return node_->requires_grad; }

    double operator()(int i, int j) const {
        return node_->val[static_cast<std::size_t>(i) * node_->cols + j];
    }
    double item() const;  // value of a 1x1 tensor

    std::span<const double> values() const { return node_->val; }
    std::span<const double> grad_values() const { return node_->grad; }
    Tensor grad() const;  // gradient snapshot as a plain tensor

    // Parameter mutation (optimizer / gradcheck only).
    std::span<double> values_mut() { return node_->val; }
    void round_to_dtype();
    void zero_grad() { node_->grad.assign(node_->val.size(), 0.0); }

    std::shared_ptr<detail::TensorNode> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<detail::TensorNode> n) { return Tensor(std::move(n)); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> node_;
};

// Reverse-mode tape. Constructing a tape makes it active on this thread;
// operations on tracked tensors append backward closures. backward(loss)
// zeroes touched gradients and replays closures in reverse order, which makes
// gradients deterministic for identical forward passes.
class GradTape {
public:
    GradTape();
    ~GradTape();
    GradTape(const GradTape&) = delete;
    GradTape& operator=(const GradTape&) = delete;

    static GradTape* active();

    void record(std::function<void()> step,
                std::vector<std::shared_ptr<detail::TensorNode>> touched);
    void backward(const Tensor& loss);

private:
    std::vector<std::function<void()>> steps_;
    std::vector<std::shared_ptr<detail::TensorNode>> touched_;
};

// ---- primitive operations -------------------------------------------------
// Binary elementwise ops broadcast along either axis (NumPy-style for rank 2).

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);

Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
Tensor sqrt(const Tensor& t);
Tensor cos(const Tensor& t);
Tensor sin(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor pow(const Tensor& t, double p);
Tensor neg(const Tensor& t);

Tensor sum_all(const Tensor& t);
Tensor mean_all(const Tensor& t);
Tensor sum_axis(const Tensor& t, int axis);
Tensor mean_axis(const Tensor& t, int axis);
Tensor softmax(const Tensor& t, int axis);

Tensor concat(const std::vector<Tensor>& ts, int axis);
std::vector<Tensor> split(const Tensor& t, const std::vector<int>& sizes, int axis);
Tensor gather_rows(const Tensor& t, const std::vector<int>& idx);
Tensor reshape(const Tensor& t, int rows, int cols);
Tensor transpose(const Tensor& t);
Tensor broadcast_to(const Tensor& t, int rows, int cols);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return divide(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s, a.dtype())); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s, a.dtype())); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s, a.dtype())); }
inline Tensor operator/(const Tensor& a, double s) { return divide(a, Tensor::scalar(s, a.dtype())); }
inline Tensor operator*(double s, const Tensor& a) { return a * s; }
inline Tensor operator+(double s, const Tensor& a) { return a + s; }
inline Tensor operator-(double s, const Tensor& a) { return sub(Tensor::scalar(s, a.dtype()), a); }

// max(t, c) elementwise, composed from relu
inline Tensor clamp_min(const Tensor& t, double c) { return relu(t - c) + c; }

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// f must map x to a 1x1 tensor and be evaluable at x +- h per coordinate.
double gradcheck(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-4);

}  // namespace geomancer
