#include "ckr/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ckr/kernels.hpp"

namespace ckr {

namespace {

std::unique_ptr<ParameterTensor> make_param(const std::string& name, std::size_t r, std::size_t c,
                                            bool train = true) {
    return std::make_unique<ParameterTensor>(name, std::vector<std::size_t>{r, c}, train);
}

void leaky(Matrix& m) {
    for (auto& v : m.data) v = v > 0.0 ? v : 0.01 * v;
}

}  // namespace

CouplingSurrogate::CouplingSurrogate(const SurrogateConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.in_dim == 0 || cfg_.out_dim == 0)
        throw ConfigError("surrogate: input and output dimensions must be positive");
    w_in_ = make_param("sur.in.w", cfg_.in_dim, cfg_.width);
    b_in_ = make_param("sur.in.b", 1, cfg_.width);
    init_dense_glorot(*w_in_, rng);
    for (std::size_t b = 0; b < cfg_.blocks; ++b) {
        Block blk;
        const std::string tag = "sur.blk" + std::to_string(b);
        blk.w1 = make_param(tag + ".w1", cfg_.width, cfg_.width);
        blk.b1 = make_param(tag + ".b1", 1, cfg_.width);
        blk.w2 = make_param(tag + ".w2", cfg_.width, cfg_.width);
        blk.b2 = make_param(tag + ".b2", 1, cfg_.width);
        init_dense_glorot(*blk.w1, rng);
        init_dense_glorot(*blk.w2, rng);
        blocks_.push_back(std::move(blk));
    }
    // zero readout: the net starts at the (standardized) target mean
    w_out_ = make_param("sur.out.w", cfg_.width, cfg_.out_dim);
    b_out_ = make_param("sur.out.b", 1, cfg_.out_dim);

    in_shift_ = make_param("sur.std.in.shift", 1, cfg_.in_dim, false);
    in_inv_scale_ = make_param("sur.std.in.inv_scale", 1, cfg_.in_dim, false);
    out_shift_ = make_param("sur.std.out.shift", 1, cfg_.out_dim, false);
    out_scale_ = make_param("sur.std.out.scale", 1, cfg_.out_dim, false);
    std::fill(in_inv_scale_->values.begin(), in_inv_scale_->values.end(), 1.0);
    std::fill(out_scale_->values.begin(), out_scale_->values.end(), 1.0);

    build_graph();
}

void CouplingSurrogate::build_graph() {
    Graph& g = graph_;
    in_node_ = g.input("x", cfg_.in_dim);
    target_node_ = g.input("y", cfg_.out_dim);
    int h = g.leaky_relu(g.dense(in_node_, w_in_.get(), b_in_.get()));
    for (const auto& blk : blocks_) {
        int inner = g.leaky_relu(g.dense(h, blk.w1.get(), blk.b1.get()));
        int out = g.dense(inner, blk.w2.get(), blk.b2.get());
        h = g.leaky_relu(g.add(h, out));
    }
    pred_node_ = g.dense(h, w_out_.get(), b_out_.get());
    const int diff = g.add(pred_node_, g.mul(target_node_, g.scalar(-1.0)));
    loss_node_ = g.mean_all(g.mul(diff, diff));
    g.mark_output("pred", pred_node_);
    g.mark_output("loss", loss_node_);
}

void CouplingSurrogate::freeze_standardization(const Matrix& x, const Matrix& y) {
    auto freeze = [](const Matrix& m, Vec& shift, Vec& scale, bool inverse) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < m.rows; ++i) mean += m(i, j);
            mean /= static_cast<double>(m.rows);
            double var = 0.0;
            for (std::size_t i = 0; i < m.rows; ++i) {
                const double d = m(i, j) - mean;
                var += d * d;
            }
            var /= static_cast<double>(m.rows);
            const double sd = std::sqrt(var);
            shift[j] = mean;
            if (inverse)
                scale[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
            else
                scale[j] = sd > 1e-12 ? sd : 1.0;
        }
    };
    freeze(x, in_shift_->values, in_inv_scale_->values, true);
    freeze(y, out_shift_->values, out_scale_->values, false);
}

Matrix CouplingSurrogate::standardize_in(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            out(i, j) = (x(i, j) - in_shift_->values[j]) * in_inv_scale_->values[j];
    return out;
}

Matrix CouplingSurrogate::standardize_out(const Matrix& y) const {
    Matrix out(y.rows, y.cols);
    for (std::size_t i = 0; i < y.rows; ++i)
        for (std::size_t j = 0; j < y.cols; ++j)
            out(i, j) = (y(i, j) - out_shift_->values[j]) / out_scale_->values[j];
    return out;
}

Matrix CouplingSurrogate::net_forward(const Matrix& x_std) const {
    const auto& K = kern::active();
    auto dense = [&K](const Matrix& in, const ParameterTensor& w, const ParameterTensor& b) {
        Matrix out(in.rows, w.shape[1]);
        K.gemm_nn(in.rows, w.shape[1], w.shape[0], in.data.data(), w.values.data(),
                  out.data.data(), false);
        for (std::size_t i = 0; i < in.rows; ++i)
            K.vadd(w.shape[1], out.row(i), b.values.data(), out.row(i));
        return out;
    };
    Matrix h = dense(x_std, *w_in_, *b_in_);
    leaky(h);
    for (const auto& blk : blocks_) {
        Matrix inner = dense(h, *blk.w1, *blk.b1);
        leaky(inner);
        Matrix out = dense(inner, *blk.w2, *blk.b2);
        K.vadd(h.size(), h.data.data(), out.data.data(), h.data.data());
        leaky(h);
    }
    return dense(h, *w_out_, *b_out_);
}

Matrix CouplingSurrogate::eval(const Matrix& x) const {
    if (x.cols != cfg_.in_dim) throw ConfigError("surrogate eval: input width mismatch");
    Matrix pred = net_forward(standardize_in(x));
    for (std::size_t i = 0; i < pred.rows; ++i)
        for (std::size_t j = 0; j < pred.cols; ++j)
            pred(i, j) = pred(i, j) * out_scale_->values[j] + out_shift_->values[j];
    return pred;
}

Vec CouplingSurrogate::eval_one(const Vec& x) const {
    Matrix m(1, x.size());
    std::copy(x.begin(), x.end(), m.row(0));
    const Matrix out = eval(m);
    return Vec(out.row(0), out.row(0) + out.cols);
}

double CouplingSurrogate::forward_loss(const Matrix& x_std, const Matrix& y_std) {
    graph_.forward_eval({{"x", &x_std}, {"y", &y_std}});
    return graph_.value(loss_node_)(0, 0);
}

std::vector<ParameterTensor*> CouplingSurrogate::parameters() {
    std::vector<ParameterTensor*> out{w_in_.get(), b_in_.get()};
    for (auto& blk : blocks_) {
        out.push_back(blk.w1.get());
        out.push_back(blk.b1.get());
        out.push_back(blk.w2.get());
        out.push_back(blk.b2.get());
    }
    out.push_back(w_out_.get());
    out.push_back(b_out_.get());
    return out;
}

Vec CouplingSurrogate::snapshot_values() const {
    Vec out;
    auto* self = const_cast<CouplingSurrogate*>(this);
    for (auto* p : self->parameters()) out.insert(out.end(), p->values.begin(), p->values.end());
    return out;
}

void CouplingSurrogate::restore_values(const Vec& values) {
    std::size_t off = 0;
    for (auto* p : parameters()) {
        std::copy_n(values.begin() + off, p->size(), p->values.begin());
        off += p->size();
    }
    if (off != values.size()) throw UsageError("surrogate: snapshot size mismatch");
}

std::vector<CheckpointEntry> CouplingSurrogate::to_checkpoint() const {
    std::vector<CheckpointEntry> entries;
    CheckpointEntry meta;
    meta.kind = CheckpointEntry::Meta;
    meta.name = "sur.meta";
    meta.dims = {4};
    meta.data = {static_cast<double>(cfg_.in_dim), static_cast<double>(cfg_.out_dim),
                 static_cast<double>(cfg_.width), static_cast<double>(cfg_.blocks)};
    entries.push_back(std::move(meta));
    auto push = [&entries](const ParameterTensor* p, CheckpointEntry::Kind kind) {
        CheckpointEntry e;
        e.kind = kind;
        e.name = p->name;
        e.dims = p->shape;
        e.data = p->values;
        entries.push_back(std::move(e));
    };
    push(in_shift_.get(), CheckpointEntry::Buffer);
    push(in_inv_scale_.get(), CheckpointEntry::Buffer);
    push(out_shift_.get(), CheckpointEntry::Buffer);
    push(out_scale_.get(), CheckpointEntry::Buffer);
    auto* self = const_cast<CouplingSurrogate*>(this);
    for (auto* p : self->parameters()) push(p, CheckpointEntry::Parameter);
    return entries;
}

CouplingSurrogate CouplingSurrogate::from_checkpoint(const std::vector<CheckpointEntry>& entries) {
    const auto& meta = checkpoint_find(entries, "sur.meta");
    if (meta.data.size() != 4) throw UsageError("surrogate checkpoint: bad meta entry");
    SurrogateConfig cfg;
    cfg.in_dim = static_cast<std::size_t>(meta.data[0]);
    cfg.out_dim = static_cast<std::size_t>(meta.data[1]);
    cfg.width = static_cast<std::size_t>(meta.data[2]);
    cfg.blocks = static_cast<std::size_t>(meta.data[3]);
    Rng rng(0);
    CouplingSurrogate model(cfg, rng);
    auto fill = [&entries](ParameterTensor* p) {
        const auto& e = checkpoint_find(entries, p->name);
        if (e.data.size() != p->size())
            throw UsageError("surrogate checkpoint: size mismatch for '" + p->name + "'");
        p->values = e.data;
    };
    fill(model.in_shift_.get());
    fill(model.in_inv_scale_.get());
    fill(model.out_shift_.get());
    fill(model.out_scale_.get());
    for (auto* p : model.parameters()) fill(p);
    return model;
}

SurrogateTrainResult train_surrogate(CouplingSurrogate& model, const Matrix& x, const Matrix& y,
                                     const SurrogateConfig& cfg) {
    const std::size_t n = x.rows;
    if (y.rows != n) throw ConfigError("train_surrogate: x/y row mismatch");
    if (n < 10) throw ConfigError("train_surrogate: not enough samples");

    model.freeze_standardization(x, y);
    const Matrix xs = model.standardize_in(x);
    const Matrix ys = model.standardize_out(y);

    Rng rng(cfg.seed);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[rng.below(i + 1)]);
    const std::size_t n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(cfg.holdout_fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val;

    auto gather = [](const Matrix& m, const std::vector<std::size_t>& idx, std::size_t b,
                     std::size_t c) {
        Matrix out(c, m.cols);
        for (std::size_t i = 0; i < c; ++i) std::copy_n(m.row(idx[b + i]), m.cols, out.row(i));
        return out;
    };
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + n_val);
    std::vector<std::size_t> train_idx(perm.begin() + n_val, perm.end());
    const Matrix xv = gather(xs, val_idx, 0, n_val);
    const Matrix yv = gather(ys, val_idx, 0, n_val);

    AdamConfig acfg;
    acfg.lr = cfg.lr;
    Adam opt(model.parameters(), acfg);

    SurrogateTrainResult result;
    Vec best = model.snapshot_values();
    double best_mse = model.forward_loss(xv, yv);
    std::size_t best_epoch = 0, since_best = 0;

    const std::size_t batch = std::min(cfg.batch, n_train);
    const std::size_t n_batches = std::max<std::size_t>(1, n_train / batch);
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        // cosine decay toward lr/100 across the epoch budget
        const double frac = static_cast<double>(epoch - 1) / static_cast<double>(cfg.max_epochs);
        opt.config().lr = cfg.lr * (0.01 + 0.99 * 0.5 * (1.0 + std::cos(M_PI * frac)));
        for (std::size_t i = n_train; i-- > 1;) std::swap(train_idx[i], train_idx[rng.below(i + 1)]);
        for (std::size_t b = 0; b < n_batches; ++b) {
            const Matrix xb = gather(xs, train_idx, b * batch, batch);
            const Matrix yb = gather(ys, train_idx, b * batch, batch);
            const double loss = model.forward_loss(xb, yb);
            if (!std::isfinite(loss))
                throw NumericError("train_surrogate: non-finite loss at epoch " +
                                   std::to_string(epoch));
            model.graph().backward_grad(model.loss_node());
            opt.step();
        }
        const double val = model.forward_loss(xv, yv);
        result.val_mse.push_back(val);
        if (val < best_mse) {
            best_mse = val;
            best = model.snapshot_values();
            best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    model.restore_values(best);
    result.best_val_mse = best_mse;
    result.best_epoch = best_epoch;
    return result;
}

}  // namespace ckr
