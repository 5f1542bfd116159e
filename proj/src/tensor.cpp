#include "geomancer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geomancer {

namespace {

thread_local std::vector<GradTape*> g_tape_stack;

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

NodePtr make_node(int rows, int cols, DType dt) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("tensor: shape must be positive");
    auto n = std::make_shared<TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->dtype = dt;
    n->val.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    return n;
}

inline double cast_prec(double v, DType dt) {
    return dt == DType::F32 ? static_cast<double>(static_cast<float>(v)) : v;
}

void finalize(const NodePtr& n, const char* op) {
    if (n->dtype == DType::F32) {
        for (auto& v : n->val) v = static_cast<double>(static_cast<float>(v));
    }
    for (double v : n->val) {
        if (!std::isfinite(v)) {
            throw std::domain_error(std::string("tensor: non-finite value produced by ") + op);
        }
    }
}

bool tracked(const Tensor& t) { return t.node()->tracked; }

bool should_record(std::initializer_list<const Tensor*> inputs) {
    if (!GradTape::active()) return false;
    for (const Tensor* t : inputs) {
        if (t->node()->tracked) return true;
    }
    return false;
}

void mark_out(const NodePtr& out) { out->tracked = true; }

// Map an output coordinate to the flat index of a (possibly broadcast) input.
inline std::size_t bidx(const NodePtr& n, int i, int j) {
    const int r = n->rows == 1 ? 0 : i;
    const int c = n->cols == 1 ? 0 : j;
    return static_cast<std::size_t>(r) * n->cols + c;
}

void check_broadcast(const NodePtr& a, const NodePtr& b, const char* op) {
    const bool rows_ok = a->rows == b->rows || a->rows == 1 || b->rows == 1;
    const bool cols_ok = a->cols == b->cols || a->cols == 1 || b->cols == 1;
    if (!rows_ok || !cols_ok) {
        throw std::invalid_argument(std::string("tensor: incompatible shapes in ") + op);
    }
}

template <class Fwd, class Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* name, Fwd fwd, Bwd bwd) {
    auto an = a.node();
    auto bn = b.node();
    check_broadcast(an, bn, name);
    const int rows = std::max(an->rows, bn->rows);
    const int cols = std::max(an->cols, bn->cols);
    auto on = make_node(rows, cols, promote(an->dtype, bn->dtype));
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            on->val[static_cast<std::size_t>(i) * cols + j] =
                fwd(an->val[bidx(an, i, j)], bn->val[bidx(bn, i, j)]);
        }
    }
    finalize(on, name);
    if (should_record({&a, &b})) {
        mark_out(on);
        GradTape::active()->record(
            [an, bn, on, bwd]() {
                const int rows = on->rows, cols = on->cols;
                const bool need_a = an->tracked, need_b = bn->tracked;
                if (need_a) an->ensure_grad();
                if (need_b) bn->ensure_grad();
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        const std::size_t oi = static_cast<std::size_t>(i) * cols + j;
                        const double g = on->grad[oi];
                        if (g == 0.0) continue;
                        double da = 0.0, db = 0.0;
                        bwd(an->val[bidx(an, i, j)], bn->val[bidx(bn, i, j)], g, da, db);
                        if (need_a) an->grad[bidx(an, i, j)] += da;
                        if (need_b) bn->grad[bidx(bn, i, j)] += db;
                    }
                }
            },
            {an, bn, on});
    }
    return Tensor::wrap(on);
}

template <class Fwd, class Bwd>
Tensor unary_op(const Tensor& t, const char* name, Fwd fwd, Bwd bwd) {
    auto xn = t.node();
    auto on = make_node(xn->rows, xn->cols, xn->dtype);
    for (std::size_t i = 0; i < xn->val.size(); ++i) on->val[i] = fwd(xn->val[i]);
    finalize(on, name);
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on, bwd]() {
                xn->ensure_grad();
                for (std::size_t i = 0; i < xn->val.size(); ++i) {
                    xn->grad[i] += bwd(xn->val[i], on->val[i]) * on->grad[i];
                }
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(int rows, int cols, DType dt) {
    return Tensor(make_node(rows, cols, dt));
}

Tensor Tensor::full(int rows, int cols, double v, DType dt) {
    auto n = make_node(rows, cols, dt);
    std::fill(n->val.begin(), n->val.end(), cast_prec(v, dt));
    return Tensor(n);
}

Tensor Tensor::scalar(double v, DType dt) { return full(1, 1, v, dt); }

Tensor Tensor::from(int rows, int cols, std::vector<double> vals, DType dt) {
    auto n = make_node(rows, cols, dt);
    if (vals.size() != n->val.size()) {
        throw std::invalid_argument("tensor: value count does not match shape");
    }
    n->val = std::move(vals);
    if (dt == DType::F32) {
        for (auto& v : n->val) v = cast_prec(v, dt);
    }
    return Tensor(n);
}

Tensor Tensor::param(int rows, int cols, std::vector<double> vals, DType dt) {
    Tensor t = from(rows, cols, std::move(vals), dt);
    t.node()->requires_grad = true;
    t.node()->tracked = true;
    return t;
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
    return node_->val[0];
}

Tensor Tensor::grad() const {
    auto g = make_node(node_->rows, node_->cols, DType::F64);
    if (node_->grad.size() == g->val.size()) g->val = node_->grad;
    return Tensor(g);
}

void Tensor::round_to_dtype() {
    if (node_->dtype == DType::F32) {
        for (auto& v : node_->val) v = cast_prec(v, DType::F32);
    }
}

// ---- GradTape ---------------------------------------------------------------

GradTape::GradTape() { g_tape_stack.push_back(this); }

GradTape::~GradTape() {
    if (!g_tape_stack.empty() && g_tape_stack.back() == this) g_tape_stack.pop_back();
}

GradTape* GradTape::active() {
    return g_tape_stack.empty() ? nullptr : g_tape_stack.back();
}

void GradTape::record(std::function<void()> step,
                      std::vector<std::shared_ptr<detail::TensorNode>> touched) {
    steps_.push_back(std::move(step));
    for (auto& n : touched) touched_.push_back(std::move(n));
}

void GradTape::backward(const Tensor& loss) {
    if (loss.size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    for (const auto& n : touched_) n->grad.assign(n->val.size(), 0.0);
    auto ln = loss.node();
    ln->ensure_grad();
    ln->grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// ---- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    auto an = a.node();
    auto bn = b.node();
    if (an->cols != bn->rows) throw std::invalid_argument("matmul: inner dimensions disagree");
    const int m = an->rows, k = an->cols, n = bn->cols;
    auto on = make_node(m, n, promote(an->dtype, bn->dtype));
    const double* A = an->val.data();
    const double* B = bn->val.data();
    double* C = on->val.data();
    for (int i = 0; i < m; ++i) {
        double* ci = C + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double aik = A[static_cast<std::size_t>(i) * k + kk];
            if (aik == 0.0) continue;
            const double* bk = B + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += aik * bk[j];
        }
    }
    finalize(on, "matmul");
    if (should_record({&a, &b})) {
        mark_out(on);
        GradTape::active()->record(
            [an, bn, on]() {
                const int m = an->rows, k = an->cols, n = bn->cols;
                const double* G = on->grad.data();
                if (an->tracked) {
                    an->ensure_grad();
                    // dA = G * B^T
                    for (int i = 0; i < m; ++i) {
                        for (int kk = 0; kk < k; ++kk) {
                            double acc = 0.0;
                            const double* gi = G + static_cast<std::size_t>(i) * n;
                            const double* bk = bn->val.data() + static_cast<std::size_t>(kk) * n;
                            for (int j = 0; j < n; ++j) acc += gi[j] * bk[j];
                            an->grad[static_cast<std::size_t>(i) * k + kk] += acc;
                        }
                    }
                }
                if (bn->tracked) {
                    bn->ensure_grad();
                    // dB = A^T * G
                    for (int i = 0; i < m; ++i) {
                        const double* gi = G + static_cast<std::size_t>(i) * n;
                        for (int kk = 0; kk < k; ++kk) {
                            const double aik = an->val[static_cast<std::size_t>(i) * k + kk];
                            if (aik == 0.0) continue;
                            double* bg = bn->grad.data() + static_cast<std::size_t>(kk) * n;
                            for (int j = 0; j < n; ++j) bg[j] += aik * gi[j];
                        }
                    }
                }
            },
            {an, bn, on});
    }
    return Tensor::wrap(on);
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

Tensor divide(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

Tensor exp(const Tensor& t) {
    return unary_op(
        t, "exp", [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Tensor log(const Tensor& t) {
    return unary_op(
        t, "log", [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& t) {
    return unary_op(
        t, "sqrt", [](double x) { return std::sqrt(x); },
        [](double, double y) { return 0.5 / y; });
}

Tensor cos(const Tensor& t) {
    return unary_op(
        t, "cos", [](double x) { return std::cos(x); },
        [](double x, double) { return -std::sin(x); });
}

Tensor sin(const Tensor& t) {
    return unary_op(
        t, "sin", [](double x) { return std::sin(x); },
        [](double x, double) { return std::cos(x); });
}

Tensor relu(const Tensor& t) {
    return unary_op(
        t, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor pow(const Tensor& t, double p) {
    return unary_op(
        t, "pow", [p](double x) { return std::pow(x, p); },
        [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

Tensor neg(const Tensor& t) {
    return unary_op(
        t, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor sum_all(const Tensor& t) {
    auto xn = t.node();
    auto on = make_node(1, 1, xn->dtype);
    double acc = 0.0;
    for (double v : xn->val) acc += v;
    on->val[0] = acc;
    finalize(on, "sum");
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on]() {
                xn->ensure_grad();
                const double g = on->grad[0];
                for (auto& gv : xn->grad) gv += g;
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

Tensor mean_all(const Tensor& t) {
    const double inv = 1.0 / static_cast<double>(t.size());
    return sum_all(t) * inv;
}

Tensor sum_axis(const Tensor& t, int axis) {
    auto xn = t.node();
    if (axis != 0 && axis != 1) throw std::invalid_argument("sum_axis: axis must be 0 or 1");
    const int rows = xn->rows, cols = xn->cols;
    auto on = axis == 0 ? make_node(1, cols, xn->dtype) : make_node(rows, 1, xn->dtype);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            const double v = xn->val[static_cast<std::size_t>(i) * cols + j];
            if (axis == 0) {
                on->val[j] += v;
            } else {
                on->val[i] += v;
            }
        }
    }
    finalize(on, "sum_axis");
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on, axis]() {
                xn->ensure_grad();
                const int rows = xn->rows, cols = xn->cols;
                for (int i = 0; i < rows; ++i) {
                    for (int j = 0; j < cols; ++j) {
                        xn->grad[static_cast<std::size_t>(i) * cols + j] +=
                            axis == 0 ? on->grad[j] : on->grad[i];
                    }
                }
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

Tensor mean_axis(const Tensor& t, int axis) {
    const double inv = 1.0 / static_cast<double>(axis == 0 ? t.rows() : t.cols());
    return sum_axis(t, axis) * inv;
}

Tensor softmax(const Tensor& t, int axis) {
    auto xn = t.node();
    if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
    const int rows = xn->rows, cols = xn->cols;
    auto on = make_node(rows, cols, xn->dtype);
    const int outer = axis == 1 ? rows : cols;
    const int inner = axis == 1 ? cols : rows;
    auto at = [&](int o, int k) -> std::size_t {
        return axis == 1 ? static_cast<std::size_t>(o) * cols + k
                         : static_cast<std::size_t>(k) * cols + o;
    };
    for (int o = 0; o < outer; ++o) {
        double mx = xn->val[at(o, 0)];
        for (int k = 1; k < inner; ++k) mx = std::max(mx, xn->val[at(o, k)]);
        double z = 0.0;
        for (int k = 0; k < inner; ++k) {
            const double e = std::exp(xn->val[at(o, k)] - mx);
            on->val[at(o, k)] = e;
            z += e;
        }
        for (int k = 0; k < inner; ++k) on->val[at(o, k)] /= z;
    }
    finalize(on, "softmax");
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on, axis]() {
                xn->ensure_grad();
                const int cols = xn->cols;
                const int outer = axis == 1 ? xn->rows : xn->cols;
                const int inner = axis == 1 ? xn->cols : xn->rows;
                auto at = [&](int o, int k) -> std::size_t {
                    return axis == 1 ? static_cast<std::size_t>(o) * cols + k
                                     : static_cast<std::size_t>(k) * cols + o;
                };
                for (int o = 0; o < outer; ++o) {
                    double dot = 0.0;
                    for (int k = 0; k < inner; ++k) dot += on->grad[at(o, k)] * on->val[at(o, k)];
                    for (int k = 0; k < inner; ++k) {
                        xn->grad[at(o, k)] += on->val[at(o, k)] * (on->grad[at(o, k)] - dot);
                    }
                }
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

Tensor concat(const std::vector<Tensor>& ts, int axis) {
    if (ts.empty()) throw std::invalid_argument("concat: empty input");
    if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
    DType dt = ts[0].dtype();
    int rows = ts[0].rows(), cols = ts[0].cols();
    for (std::size_t i = 1; i < ts.size(); ++i) {
        dt = promote(dt, ts[i].dtype());
        if (axis == 0) {
            if (ts[i].cols() != cols) throw std::invalid_argument("concat: column mismatch");
            rows += ts[i].rows();
        } else {
            if (ts[i].rows() != rows) throw std::invalid_argument("concat: row mismatch");
            cols += ts[i].cols();
        }
    }
    auto on = make_node(rows, cols, dt);
    int off = 0;
    for (const auto& t : ts) {
        auto xn = t.node();
        for (int i = 0; i < xn->rows; ++i) {
            for (int j = 0; j < xn->cols; ++j) {
                const int oi = axis == 0 ? i + off : i;
                const int oj = axis == 0 ? j : j + off;
                on->val[static_cast<std::size_t>(oi) * cols + oj] =
                    xn->val[static_cast<std::size_t>(i) * xn->cols + j];
            }
        }
        off += axis == 0 ? xn->rows : xn->cols;
    }
    finalize(on, "concat");
    bool rec = GradTape::active() != nullptr;
    if (rec) {
        rec = false;
        for (const auto& t : ts) rec = rec || tracked(t);
    }
    if (rec) {
        mark_out(on);
        std::vector<NodePtr> ins;
        ins.reserve(ts.size());
        for (const auto& t : ts) ins.push_back(t.node());
        std::vector<NodePtr> touched = ins;
        touched.push_back(on);
        GradTape::active()->record(
            [ins, on, axis]() {
                const int cols = on->cols;
                int off = 0;
                for (const auto& xn : ins) {
                    if (xn->tracked) {
                        xn->ensure_grad();
                        for (int i = 0; i < xn->rows; ++i) {
                            for (int j = 0; j < xn->cols; ++j) {
                                const int oi = axis == 0 ? i + off : i;
                                const int oj = axis == 0 ? j : j + off;
                                xn->grad[static_cast<std::size_t>(i) * xn->cols + j] +=
                                    on->grad[static_cast<std::size_t>(oi) * cols + oj];
                            }
                        }
                    }
                    off += axis == 0 ? xn->rows : xn->cols;
                }
            },
            std::move(touched));
    }
    return Tensor::wrap(on);
}

std::vector<Tensor> split(const Tensor& t, const std::vector<int>& sizes, int axis) {
    auto xn = t.node();
    if (axis != 0 && axis != 1) throw std::invalid_argument("split: axis must be 0 or 1");
    int total = 0;
    for (int s : sizes) total += s;
    if (total != (axis == 0 ? xn->rows : xn->cols)) {
        throw std::invalid_argument("split: sizes do not cover the axis");
    }
    std::vector<Tensor> outs;
    outs.reserve(sizes.size());
    int off = 0;
    const bool rec = should_record({&t});
    for (int s : sizes) {
        auto on = axis == 0 ? make_node(s, xn->cols, xn->dtype) : make_node(xn->rows, s, xn->dtype);
        for (int i = 0; i < on->rows; ++i) {
            for (int j = 0; j < on->cols; ++j) {
                const int xi = axis == 0 ? i + off : i;
                const int xj = axis == 0 ? j : j + off;
                on->val[static_cast<std::size_t>(i) * on->cols + j] =
                    xn->val[static_cast<std::size_t>(xi) * xn->cols + xj];
            }
        }
        finalize(on, "split");
        if (rec) {
            mark_out(on);
            const int local_off = off;
            GradTape::active()->record(
                [xn, on, axis, local_off]() {
                    xn->ensure_grad();
                    for (int i = 0; i < on->rows; ++i) {
                        for (int j = 0; j < on->cols; ++j) {
                            const int xi = axis == 0 ? i + local_off : i;
                            const int xj = axis == 0 ? j : j + local_off;
                            xn->grad[static_cast<std::size_t>(xi) * xn->cols + xj] +=
                                on->grad[static_cast<std::size_t>(i) * on->cols + j];
                        }
                    }
                },
                {xn, on});
        }
        outs.push_back(Tensor::wrap(on));
        off += s;
    }
    return outs;
}

Tensor gather_rows(const Tensor& t, const std::vector<int>& idx) {
    auto xn = t.node();
    auto on = make_node(static_cast<int>(idx.size()), xn->cols, xn->dtype);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= xn->rows) throw std::out_of_range("gather_rows: index");
        std::copy_n(xn->val.begin() + static_cast<std::size_t>(idx[i]) * xn->cols, xn->cols,
                    on->val.begin() + i * xn->cols);
    }
    finalize(on, "gather_rows");
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on, idx]() {
                xn->ensure_grad();
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    for (int j = 0; j < xn->cols; ++j) {
                        xn->grad[static_cast<std::size_t>(idx[i]) * xn->cols + j] +=
                            on->grad[i * xn->cols + j];
                    }
                }
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

Tensor reshape(const Tensor& t, int rows, int cols) {
    auto xn = t.node();
    auto on = make_node(rows, cols, xn->dtype);
    if (on->val.size() != xn->val.size()) throw std::invalid_argument("reshape: size mismatch");
    on->val = xn->val;
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on]() {
                xn->ensure_grad();
                for (std::size_t i = 0; i < xn->val.size(); ++i) xn->grad[i] += on->grad[i];
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

Tensor transpose(const Tensor& t) {
    auto xn = t.node();
    auto on = make_node(xn->cols, xn->rows, xn->dtype);
    for (int i = 0; i < xn->rows; ++i) {
        for (int j = 0; j < xn->cols; ++j) {
            on->val[static_cast<std::size_t>(j) * on->cols + i] =
                xn->val[static_cast<std::size_t>(i) * xn->cols + j];
        }
    }
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on]() {
                xn->ensure_grad();
                for (int i = 0; i < xn->rows; ++i) {
                    for (int j = 0; j < xn->cols; ++j) {
                        xn->grad[static_cast<std::size_t>(i) * xn->cols + j] +=
                            on->grad[static_cast<std::size_t>(j) * on->cols + i];
                    }
                }
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

Tensor broadcast_to(const Tensor& t, int rows, int cols) {
    auto xn = t.node();
    if ((xn->rows != rows && xn->rows != 1) || (xn->cols != cols && xn->cols != 1)) {
        throw std::invalid_argument("broadcast_to: incompatible target");
    }
    auto on = make_node(rows, cols, xn->dtype);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            on->val[static_cast<std::size_t>(i) * cols + j] = xn->val[bidx(xn, i, j)];
        }
    }
    if (should_record({&t})) {
        mark_out(on);
        GradTape::active()->record(
            [xn, on]() {
                xn->ensure_grad();
                for (int i = 0; i < on->rows; ++i) {
                    for (int j = 0; j < on->cols; ++j) {
                        xn->grad[bidx(xn, i, j)] += on->grad[static_cast<std::size_t>(i) * on->cols + j];
                    }
                }
            },
            {xn, on});
    }
    return Tensor::wrap(on);
}

double gradcheck(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h) {
    if (!x.requires_grad()) throw std::invalid_argument("gradcheck: x must require grad");
    std::vector<double> analytic(x.size());
    {
        x.zero_grad();  // a parameter outside the path has gradient zero
        GradTape tape;
        Tensor loss = f(x);
        if (loss.size() != 1) throw std::invalid_argument("gradcheck: f must return a scalar");
        tape.backward(loss);
        auto g = x.grad_values();
        std::copy(g.begin(), g.end(), analytic.begin());
    }
    auto vals = x.values_mut();
    double worst = 0.0;
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double orig = vals[i];
        vals[i] = orig + h;
        const double fp = f(x).item();
        vals[i] = orig - h;
        const double fm = f(x).item();
        vals[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::domain_error("gradcheck: non-finite function value");
        }
        const double numeric = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace geomancer
