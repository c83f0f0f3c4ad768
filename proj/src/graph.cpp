#include "ckr/graph.hpp"

#include <cmath>
#include <cstring>

#include "ckr/kernels.hpp"
#include "ckr/pwl.hpp"

namespace ckr {

const char* Graph::op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Const: return "const";
        case Op::ParamRef: return "param_ref";
        case Op::Dense: return "dense";
        case Op::Tanh: return "tanh";
        case Op::Relu: return "relu";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Sigmoid: return "sigmoid";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Add: return "add";
        case Op::Mul: return "mul";
        case Op::RowSum: return "row_sum";
        case Op::MeanAll: return "mean_all";
        case Op::Concat: return "concat";
        case Op::Slice: return "slice";
        case Op::PwlCdf: return "pwl_cdf";
    }
    return "?";
}

int Graph::new_node(std::size_t cols) {
    Node n;
    n.cols = cols;
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
}

void Graph::check_built(int node) const {
    if (node < 0 || node >= static_cast<int>(nodes_.size()))
        throw ConfigError("graph: reference to unknown node id " + std::to_string(node));
}

int Graph::input(const std::string& name, std::size_t cols) {
    if (inputs_.count(name)) throw ConfigError("graph: duplicate input '" + name + "'");
    int id = new_node(cols);
    records_.push_back({Op::Input, {}, {id}});
    inputs_[name] = id;
    return id;
}

int Graph::constant(const Matrix& value) {
    int id = new_node(value.cols);
    nodes_[id].value = value;
    nodes_[id].fixed = true;
    records_.push_back({Op::Const, {}, {id}});
    return id;
}

int Graph::scalar(double value) {
    Matrix m(1, 1);
    m(0, 0) = value;
    return constant(m);
}

int Graph::param_ref(ParameterTensor* p, std::size_t rows, std::size_t cols) {
    if (rows * cols != p->size())
        throw ConfigError("graph: param_ref shape mismatch for '" + p->name + "'");
    int id = new_node(cols);
    nodes_[id].value.resize(rows, cols);
    Record rec{Op::ParamRef, {}, {id}};
    rec.w = p;
    records_.push_back(rec);
    return id;
}

int Graph::dense(int x, ParameterTensor* w, ParameterTensor* b) {
    check_built(x);
    if (w->shape.size() != 2 || w->shape[0] != nodes_[x].cols)
        throw ConfigError("graph: dense weight shape mismatch for '" + w->name + "'");
    const std::size_t out = w->shape[1];
    if (b != nullptr && b->size() != out)
        throw ConfigError("graph: dense bias shape mismatch for '" + b->name + "'");
    int id = new_node(out);
    Record rec{Op::Dense, {x}, {id}};
    rec.w = w;
    rec.b = b;
    records_.push_back(rec);
    return id;
}

#define CKR_UNARY(fn, opkind)                    \
    int Graph::fn(int x) {                       \
        check_built(x);                          \
        int id = new_node(nodes_[x].cols);       \
        records_.push_back({opkind, {x}, {id}}); \
        return id;                               \
    }

CKR_UNARY(tanh_op, Op::Tanh)
CKR_UNARY(relu, Op::Relu)
CKR_UNARY(sigmoid, Op::Sigmoid)
CKR_UNARY(exp_op, Op::Exp)
CKR_UNARY(log_op, Op::Log)
#undef CKR_UNARY

int Graph::leaky_relu(int x, double slope) {
    check_built(x);
    int id = new_node(nodes_[x].cols);
    Record rec{Op::LeakyRelu, {x}, {id}};
    rec.slope = slope;
    records_.push_back(rec);
    return id;
}

namespace {
std::size_t broadcast_cols(std::size_t a, std::size_t b, const char* what) {
    if (a == b) return a;
    if (a == 1) return b;
    if (b == 1) return a;
    throw ConfigError(std::string("graph: ") + what + " column mismatch (" +
                      std::to_string(a) + " vs " + std::to_string(b) + ")");
}
}  // namespace

int Graph::add(int a, int b) {
    check_built(a);
    check_built(b);
    int id = new_node(broadcast_cols(nodes_[a].cols, nodes_[b].cols, "add"));
    records_.push_back({Op::Add, {a, b}, {id}});
    return id;
}

int Graph::mul(int a, int b) {
    check_built(a);
    check_built(b);
    int id = new_node(broadcast_cols(nodes_[a].cols, nodes_[b].cols, "mul"));
    records_.push_back({Op::Mul, {a, b}, {id}});
    return id;
}

int Graph::row_sum(int x) {
    check_built(x);
    int id = new_node(1);
    records_.push_back({Op::RowSum, {x}, {id}});
    return id;
}

int Graph::mean_all(int x) {
    check_built(x);
    int id = new_node(1);
    records_.push_back({Op::MeanAll, {x}, {id}});
    return id;
}

int Graph::concat(const std::vector<int>& xs) {
    if (xs.empty()) throw ConfigError("graph: concat of zero nodes");
    std::size_t total = 0;
    for (int x : xs) {
        check_built(x);
        total += nodes_[x].cols;
    }
    int id = new_node(total);
    records_.push_back({Op::Concat, xs, {id}});
    return id;
}

int Graph::slice(int x, std::size_t c0, std::size_t c1) {
    check_built(x);
    if (c0 >= c1 || c1 > nodes_[x].cols)
        throw ConfigError("graph: slice range [" + std::to_string(c0) + "," + std::to_string(c1) +
                          ") out of bounds for width " + std::to_string(nodes_[x].cols));
    int id = new_node(c1 - c0);
    Record rec{Op::Slice, {x}, {id}};
    rec.c0 = c0;
    rec.c1 = c1;
    records_.push_back(rec);
    return id;
}

std::pair<int, int> Graph::pwl_cdf(int x, ParameterTensor* theta) {
    check_built(x);
    if (theta->shape.size() != 2 || theta->shape[0] != nodes_[x].cols)
        throw ConfigError("graph: pwl_cdf theta shape mismatch for '" + theta->name + "'");
    int y = new_node(nodes_[x].cols);
    int ld = new_node(nodes_[x].cols);
    Record rec{Op::PwlCdf, {x}, {y, ld}};
    rec.w = theta;
    rec.scratch = static_cast<int>(pwl_scratch_.size());
    pwl_scratch_.emplace_back();
    records_.push_back(rec);
    return {y, ld};
}

int Graph::affine_const(int x, double a, double b) {
    int out = x;
    if (a != 1.0) out = mul(out, scalar(a));
    if (b != 0.0) out = add(out, scalar(b));
    return out;
}

void Graph::mark_output(const std::string& name, int node) {
    check_built(node);
    outputs_[name] = node;
}

const Matrix& Graph::output(const std::string& name) const {
    auto it = outputs_.find(name);
    if (it == outputs_.end()) throw UsageError("graph: unknown output '" + name + "'");
    return nodes_[it->second].value;
}

std::vector<ParameterTensor*> Graph::parameters() const {
    std::vector<ParameterTensor*> out;
    auto push = [&](ParameterTensor* p) {
        if (p == nullptr) return;
        for (auto* q : out)
            if (q == p) return;
        out.push_back(p);
    };
    for (const auto& rec : records_) {
        push(rec.w);
        push(rec.b);
    }
    return out;
}

// ---------------------------------------------------------------------------
// forward

void Graph::forward_eval(const std::map<std::string, const Matrix*>& inputs) {
    for (const auto& [name, id] : inputs_) {
        auto it = inputs.find(name);
        if (it == inputs.end() || it->second == nullptr)
            throw ConfigError("graph: input '" + name + "' not supplied");
        const Matrix& m = *it->second;
        if (m.cols != nodes_[id].cols)
            throw ConfigError("graph: input '" + name + "' has " + std::to_string(m.cols) +
                              " columns, expected " + std::to_string(nodes_[id].cols));
        nodes_[id].value = m;
    }
    for (const auto& [name, ptr] : inputs) {
        if (!inputs_.count(name)) throw ConfigError("graph: unknown input '" + name + "'");
        (void)ptr;
    }
    for (std::size_t r = 0; r < records_.size(); ++r) run_record(records_[r], r);
    forward_done_ = true;
}

void Graph::run_record(const Record& rec, std::size_t rec_idx) {
    const auto& K = kern::active();
    auto fail = [&](const std::string& msg) {
        throw ConfigError("graph: op " + std::to_string(rec_idx) + " (" + op_name(rec.op) + "): " + msg);
    };
    auto& out = nodes_[rec.outs[0]];
    switch (rec.op) {
        case Op::Input:
            if (out.value.cols != out.cols) fail("input was never bound");
            break;
        case Op::Const:
        case Op::ParamRef: {
            if (rec.op == Op::ParamRef) {
                std::memcpy(out.value.data.data(), rec.w->values.data(),
                            rec.w->size() * sizeof(double));
            }
            break;
        }
        case Op::Dense: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            const std::size_t in = rec.w->shape[0], o = rec.w->shape[1];
            if (x.cols != in) fail("dense input width mismatch");
            out.value.resize(x.rows, o);
            K.gemm_nn(x.rows, o, in, x.data.data(), rec.w->values.data(), out.value.data.data(), false);
            if (rec.b != nullptr) {
                for (std::size_t i = 0; i < x.rows; ++i)
                    K.vadd(o, out.value.row(i), rec.b->values.data(), out.value.row(i));
            }
            break;
        }
        case Op::Tanh: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, x.cols);
            for (std::size_t i = 0; i < x.size(); ++i) out.value.data[i] = std::tanh(x.data[i]);
            break;
        }
        case Op::Relu: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, x.cols);
            for (std::size_t i = 0; i < x.size(); ++i)
                out.value.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
            break;
        }
        case Op::LeakyRelu: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, x.cols);
            for (std::size_t i = 0; i < x.size(); ++i)
                out.value.data[i] = x.data[i] > 0.0 ? x.data[i] : rec.slope * x.data[i];
            break;
        }
        case Op::Sigmoid: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, x.cols);
            for (std::size_t i = 0; i < x.size(); ++i)
                out.value.data[i] = 1.0 / (1.0 + std::exp(-x.data[i]));
            break;
        }
        case Op::Exp: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, x.cols);
            for (std::size_t i = 0; i < x.size(); ++i) out.value.data[i] = std::exp(x.data[i]);
            break;
        }
        case Op::Log: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, x.cols);
            for (std::size_t i = 0; i < x.size(); ++i) out.value.data[i] = std::log(x.data[i]);
            break;
        }
        case Op::Add:
        case Op::Mul: {
            const Matrix& a = nodes_[rec.ins[0]].value;
            const Matrix& b = nodes_[rec.ins[1]].value;
            const std::size_t rows = std::max(a.rows, b.rows);
            const std::size_t cols = std::max(a.cols, b.cols);
            if ((a.rows != rows && a.rows != 1) || (b.rows != rows && b.rows != 1))
                fail("row broadcast mismatch");
            out.value.resize(rows, cols);
            const bool is_add = rec.op == Op::Add;
            if (a.rows == rows && b.rows == rows && a.cols == cols && b.cols == cols) {
                if (is_add) K.vadd(rows * cols, a.data.data(), b.data.data(), out.value.data.data());
                else K.vmul(rows * cols, a.data.data(), b.data.data(), out.value.data.data());
            } else {
                for (std::size_t i = 0; i < rows; ++i) {
                    const double* ra = a.row(a.rows == 1 ? 0 : i);
                    const double* rb = b.row(b.rows == 1 ? 0 : i);
                    double* ro = out.value.row(i);
                    for (std::size_t j = 0; j < cols; ++j) {
                        const double va = a.cols == 1 ? ra[0] : ra[j];
                        const double vb = b.cols == 1 ? rb[0] : rb[j];
                        ro[j] = is_add ? va + vb : va * vb;
                    }
                }
            }
            break;
        }
        case Op::RowSum: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, 1);
            for (std::size_t i = 0; i < x.rows; ++i) out.value(i, 0) = K.sum(x.cols, x.row(i));
            break;
        }
        case Op::MeanAll: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(1, 1);
            out.value(0, 0) = K.sum(x.size(), x.data.data()) / static_cast<double>(x.size());
            break;
        }
        case Op::Concat: {
            std::size_t rows = 1;
            for (int in : rec.ins) rows = std::max(rows, nodes_[in].value.rows);
            out.value.resize(rows, out.cols);
            std::size_t off = 0;
            for (int in : rec.ins) {
                const Matrix& x = nodes_[in].value;
                if (x.rows != rows && x.rows != 1) fail("concat row mismatch");
                for (std::size_t i = 0; i < rows; ++i)
                    std::memcpy(out.value.row(i) + off, x.row(x.rows == 1 ? 0 : i),
                                x.cols * sizeof(double));
                off += x.cols;
            }
            break;
        }
        case Op::Slice: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            out.value.resize(x.rows, rec.c1 - rec.c0);
            for (std::size_t i = 0; i < x.rows; ++i)
                std::memcpy(out.value.row(i), x.row(i) + rec.c0,
                            (rec.c1 - rec.c0) * sizeof(double));
            break;
        }
        case Op::PwlCdf: {
            forward_pwl(rec, rec_idx);
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// backward

void Graph::backward_grad(int loss_node) {
    if (!forward_done_)
        throw UsageError("graph: backward_grad called before forward_eval");
    check_built(loss_node);
    const Matrix& lv = nodes_[loss_node].value;
    if (lv.rows != 1 || lv.cols != 1)
        throw UsageError("graph: backward_grad loss must be scalar, got " +
                         std::to_string(lv.rows) + "x" + std::to_string(lv.cols));
    for (auto& n : nodes_) {
        n.grad.resize(n.value.rows, n.value.cols);
    }
    nodes_[loss_node].grad(0, 0) = 1.0;
    for (std::size_t r = records_.size(); r-- > 0;) back_record(records_[r]);
}

namespace {

// Accumulate g (shaped like the op output) into the gradient of an input that
// may have been broadcast along rows and/or the single-column axis.
void accumulate_broadcast(const Matrix& g, Matrix& dst) {
    if (dst.rows == g.rows && dst.cols == g.cols) {
        kern::active().vadd(g.size(), g.data.data(), dst.data.data(), dst.data.data());
        return;
    }
    for (std::size_t i = 0; i < g.rows; ++i) {
        const std::size_t di = dst.rows == 1 ? 0 : i;
        for (std::size_t j = 0; j < g.cols; ++j) {
            const std::size_t dj = dst.cols == 1 ? 0 : j;
            dst(di, dj) += g(i, j);
        }
    }
}

}  // namespace

void Graph::back_record(const Record& rec) {
    const auto& K = kern::active();
    const Matrix& g = nodes_[rec.outs[0]].grad;
    switch (rec.op) {
        case Op::Input:
        case Op::Const:
            break;
        case Op::ParamRef: {
            if (rec.w->trainable)
                K.vadd(rec.w->size(), g.data.data(), rec.w->grad.data(), rec.w->grad.data());
            break;
        }
        case Op::Dense: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            Matrix& dx = nodes_[rec.ins[0]].grad;
            const std::size_t in = rec.w->shape[0], o = rec.w->shape[1];
            if (rec.w->trainable)
                K.gemm_tn(in, o, x.rows, x.data.data(), g.data.data(), rec.w->grad.data(), true);
            if (rec.b != nullptr && rec.b->trainable) {
                for (std::size_t i = 0; i < g.rows; ++i)
                    K.vadd(o, g.row(i), rec.b->grad.data(), rec.b->grad.data());
            }
            K.gemm_nt(g.rows, in, o, g.data.data(), rec.w->values.data(), dx.data.data(), true);
            break;
        }
        case Op::Tanh: {
            const Matrix& y = nodes_[rec.outs[0]].value;
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < y.size(); ++i)
                dx.data[i] += g.data[i] * (1.0 - y.data[i] * y.data[i]);
            break;
        }
        case Op::Relu: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < x.size(); ++i)
                if (x.data[i] > 0.0) dx.data[i] += g.data[i];
            break;
        }
        case Op::LeakyRelu: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < x.size(); ++i)
                dx.data[i] += g.data[i] * (x.data[i] > 0.0 ? 1.0 : rec.slope);
            break;
        }
        case Op::Sigmoid: {
            const Matrix& y = nodes_[rec.outs[0]].value;
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < y.size(); ++i)
                dx.data[i] += g.data[i] * y.data[i] * (1.0 - y.data[i]);
            break;
        }
        case Op::Exp: {
            const Matrix& y = nodes_[rec.outs[0]].value;
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < y.size(); ++i) dx.data[i] += g.data[i] * y.data[i];
            break;
        }
        case Op::Log: {
            const Matrix& x = nodes_[rec.ins[0]].value;
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < x.size(); ++i) dx.data[i] += g.data[i] / x.data[i];
            break;
        }
        case Op::Add: {
            accumulate_broadcast(g, nodes_[rec.ins[0]].grad);
            accumulate_broadcast(g, nodes_[rec.ins[1]].grad);
            break;
        }
        case Op::Mul: {
            const Matrix& a = nodes_[rec.ins[0]].value;
            const Matrix& b = nodes_[rec.ins[1]].value;
            Matrix tmp(g.rows, g.cols);
            for (std::size_t i = 0; i < g.rows; ++i) {
                const double* rb = b.row(b.rows == 1 ? 0 : i);
                for (std::size_t j = 0; j < g.cols; ++j)
                    tmp(i, j) = g(i, j) * (b.cols == 1 ? rb[0] : rb[j]);
            }
            accumulate_broadcast(tmp, nodes_[rec.ins[0]].grad);
            for (std::size_t i = 0; i < g.rows; ++i) {
                const double* ra = a.row(a.rows == 1 ? 0 : i);
                for (std::size_t j = 0; j < g.cols; ++j)
                    tmp(i, j) = g(i, j) * (a.cols == 1 ? ra[0] : ra[j]);
            }
            accumulate_broadcast(tmp, nodes_[rec.ins[1]].grad);
            break;
        }
        case Op::RowSum: {
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < dx.rows; ++i) {
                const double gi = g(i, 0);
                double* r = dx.row(i);
                for (std::size_t j = 0; j < dx.cols; ++j) r[j] += gi;
            }
            break;
        }
        case Op::MeanAll: {
            Matrix& dx = nodes_[rec.ins[0]].grad;
            const double gi = g(0, 0) / static_cast<double>(dx.size());
            for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += gi;
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (int in : rec.ins) {
                Matrix& dx = nodes_[in].grad;
                for (std::size_t i = 0; i < g.rows; ++i) {
                    const std::size_t di = dx.rows == 1 ? 0 : i;
                    for (std::size_t j = 0; j < dx.cols; ++j) dx(di, j) += g(i, off + j);
                }
                off += dx.cols;
            }
            break;
        }
        case Op::Slice: {
            Matrix& dx = nodes_[rec.ins[0]].grad;
            for (std::size_t i = 0; i < g.rows; ++i)
                K.vadd(g.cols, g.row(i), dx.row(i) + rec.c0, dx.row(i) + rec.c0);
            break;
        }
        case Op::PwlCdf: {
            backward_pwl(rec);
            break;
        }
    }
}

// ---------------------------------------------------------------------------
// Piecewise-linear CDF bijection, elementwise: y = logit(F(sigmoid(x))).
// F is the monotone piecewise-linear CDF on [0,1] with n_bins equal-width
// bins whose positive slopes hbar are softmax-normalized to average 1.
// Tail bins are evaluated in log space so the map stays finite for any x.

void Graph::forward_pwl(const Record& rec, std::size_t rec_idx) {
    const Matrix& x = nodes_[rec.ins[0]].value;
    const std::size_t d = rec.w->shape[0];
    if (x.cols != d)
        throw ConfigError("graph: op " + std::to_string(rec_idx) + " (pwl_cdf): input width mismatch");
    Matrix& y = nodes_[rec.outs[0]].value;
    Matrix& ld = nodes_[rec.outs[1]].value;
    y.resize(x.rows, d);
    ld.resize(x.rows, d);

    PwlScratch& sc = pwl_scratch_[rec.scratch];
    sc.u.resize(x.rows, d);
    sc.bin.resize(x.rows, d);
    sc.v.resize(x.rows, d);
    sc.onemv.resize(x.rows, d);
    sc.lu.resize(x.rows, d);
    sc.logv.resize(x.rows, d);
    sc.log1mv.resize(x.rows, d);

    const PwlTables tables = pwl_tables(*rec.w);
    sc.hbar = tables.hbar;
    sc.loghbar = tables.loghbar;

    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const PwlPoint p = pwl_forward_point(tables, j, x(i, j));
            y(i, j) = p.y;
            ld(i, j) = p.ld;
            sc.u(i, j) = p.u;
            sc.bin(i, j) = static_cast<double>(p.bin);
            sc.v(i, j) = p.v;
            sc.onemv(i, j) = p.onemv;
            sc.lu(i, j) = p.lu;
            sc.logv(i, j) = p.logv;
            sc.log1mv(i, j) = p.log1mv;
        }
    }
}

void Graph::backward_pwl(const Record& rec) {
    const Matrix& gy = nodes_[rec.outs[0]].grad;
    const Matrix& gl = nodes_[rec.outs[1]].grad;
    const Matrix& ld = nodes_[rec.outs[1]].value;
    Matrix& dx = nodes_[rec.ins[0]].grad;
    const PwlScratch& sc = pwl_scratch_[rec.scratch];
    const std::size_t d = rec.w->shape[0];
    const std::size_t nb = rec.w->shape[1];
    const double inv_nb = 1.0 / static_cast<double>(nb);
    double* dth = rec.w->grad.data();
    const bool train_theta = rec.w->trainable;

    for (std::size_t i = 0; i < dx.rows; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            const double gyv = gy(i, j);
            const double glv = gl(i, j);
            if (gyv == 0.0 && glv == 0.0) continue;
            const double u = sc.u(i, j);
            const std::size_t k = static_cast<std::size_t>(sc.bin(i, j));
            const double v = sc.v(i, j);
            const double onemv = sc.onemv(i, j);
            const double lu = sc.lu(i, j);
            const double l1u = lu - nodes_[rec.ins[0]].value(i, j);
            const double lhb = sc.loghbar(j, k);
            // d y / d x and d logdet / d x
            const double dydx = std::exp(ld(i, j));
            const double term_v = std::exp(lhb + lu + l1u - sc.logv(i, j));
            const double term_1mv = std::exp(lhb + lu + l1u - sc.log1mv(i, j));
            dx(i, j) += gyv * dydx + glv * ((1.0 - 2.0 * u) + term_1mv - term_v);
            if (!train_theta) continue;
            const double e_k = static_cast<double>(k) * inv_nb;
            double* dthj = dth + j * nb;
            for (std::size_t b = 0; b < nb; ++b) {
                const double hb = sc.hbar(j, b);
                const double a_b = (b < k ? inv_nb : 0.0) + (b == k ? (u - e_k) : 0.0);
                double r_b, s_b;
                if (k == 0) {
                    r_b = (b == 0) ? 1.0 - hb * inv_nb : -hb * inv_nb;
                } else {
                    r_b = hb * (a_b - v * inv_nb) / v;
                }
                if (k == nb - 1) {
                    s_b = (b < nb - 1) ? hb * inv_nb : -(1.0 - hb * inv_nb);
                } else {
                    s_b = hb * (a_b - v * inv_nb) / onemv;
                }
                const double dlhb = (b == k ? 1.0 : 0.0) - hb * inv_nb;
                dthj[b] += gyv * (r_b + s_b) + glv * (dlhb - r_b + s_b);
            }
        }
    }
}

}  // namespace ckr
