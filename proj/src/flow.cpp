#include "ckr/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ckr/kernels.hpp"
#include "ckr/pwl.hpp"

namespace ckr {

namespace {

constexpr std::size_t kEvalChunk = 8192;
constexpr double kLog2Pi = 1.8378770664093454836;

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx,
                   std::size_t begin, std::size_t count) {
    Matrix out(count, m.cols);
    for (std::size_t i = 0; i < count; ++i)
        std::copy_n(m.row(idx[begin + i]), m.cols, out.row(i));
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// construction

FlowModel::FlowModel(const FlowConfig& cfg, Rng& rng) : cfg_(cfg) {
    if (cfg_.dim < 2) throw ConfigError("flow: |alpha| must be at least 2");
    if (!(cfg_.gamma > 0.0 && cfg_.gamma < 1.0))
        throw ConfigError("flow: gamma must lie in (0,1), got " + std::to_string(cfg_.gamma));
    if (cfg_.stages < 2 || cfg_.stages > cfg_.dim)
        throw ConfigError("flow: stage count R must satisfy 2 <= R <= |alpha|");
    if (cfg_.couplings_per_stage < 1) throw ConfigError("flow: need at least one coupling per stage");
    if (cfg_.cdf_bins < 2) throw ConfigError("flow: need at least 2 CDF bins");

    const std::size_t R = cfg_.stages;
    const std::size_t base = cfg_.dim / R;
    const std::size_t rem = cfg_.dim % R;
    block_sizes_.resize(R);
    block_offsets_.resize(R);
    std::size_t off = 0;
    for (std::size_t b = 0; b < R; ++b) {
        block_sizes_[b] = base + (b < rem ? 1 : 0);
        block_offsets_[b] = off;
        off += block_sizes_[b];
    }

    auto make_param = [](const std::string& name, std::size_t r, std::size_t c, bool train = true) {
        auto p = std::make_unique<ParameterTensor>(name, std::vector<std::size_t>{r, c}, train);
        return p;
    };

    for (std::size_t st = 0; st + 1 < R; ++st) {
        Stage stage;
        stage.block = R - 1 - st;
        stage.offset = block_offsets_[stage.block];
        stage.size = block_sizes_[stage.block];
        const std::string sname = "stage" + std::to_string(stage.block);
        for (std::size_t l = 0; l < cfg_.couplings_per_stage; ++l) {
            Coupling cp;
            if (stage.size == 1) {
                cp.given_lo = cp.given_hi = 0;
                cp.upd_lo = 0;
                cp.upd_hi = 1;
            } else {
                const std::size_t h = stage.size / 2;
                if (l % 2 == 0) {
                    cp.given_lo = 0; cp.given_hi = h;
                    cp.upd_lo = h; cp.upd_hi = stage.size;
                } else {
                    cp.given_lo = h; cp.given_hi = stage.size;
                    cp.upd_lo = 0; cp.upd_hi = h;
                }
            }
            const std::size_t given = cp.given_hi - cp.given_lo;
            const std::size_t upd = cp.upd_hi - cp.upd_lo;
            const std::size_t cond_in = given + stage.offset + cfg_.cond_dim;
            const std::string cname = sname + ".c" + std::to_string(l);
            cp.net.trunk = Mlp(cname + ".trunk",
                               {cond_in, cfg_.hidden_width, cfg_.hidden_width},
                               cfg_.conditioner_act, rng, false, true);
            cp.net.ws = make_param(cname + ".ws", cfg_.hidden_width, upd);
            cp.net.bs = make_param(cname + ".bs", 1, upd);
            cp.net.wt = make_param(cname + ".wt", cfg_.hidden_width, upd);
            cp.net.bt = make_param(cname + ".bt", 1, upd);
            cp.beta = make_param(cname + ".beta", 1, upd);
            stage.couplings.push_back(std::move(cp));

            ScaleBias sb;
            sb.s = make_param(sname + ".sb" + std::to_string(l) + ".s", 1, stage.size);
            sb.b = make_param(sname + ".sb" + std::to_string(l) + ".b", 1, stage.size);
            stage.scale_biases.push_back(std::move(sb));
        }
        stages_.push_back(std::move(stage));
    }

    cdf_theta_ = make_param("terminal.theta", block_sizes_[0], cfg_.cdf_bins);

    a_shift_ = make_param("std.alpha.shift", 1, cfg_.dim, false);
    a_inv_scale_ = make_param("std.alpha.inv_scale", 1, cfg_.dim, false);
    std::fill(a_inv_scale_->values.begin(), a_inv_scale_->values.end(), 1.0);
    if (cfg_.cond_dim > 0) {
        c_shift_ = make_param("std.cond.shift", 1, cfg_.cond_dim, false);
        c_inv_scale_ = make_param("std.cond.inv_scale", 1, cfg_.cond_dim, false);
        std::fill(c_inv_scale_->values.begin(), c_inv_scale_->values.end(), 1.0);
    }

    build_graph();
}

void FlowModel::CondNet::eval(const Matrix& in, Matrix* s, Matrix* t) const {
    const auto& K = kern::active();
    const Matrix h = trunk.eval(in);
    const std::size_t upd = ws->shape[1];
    s->resize(in.rows, upd);
    t->resize(in.rows, upd);
    K.gemm_nn(h.rows, upd, h.cols, h.data.data(), ws->values.data(), s->data.data(), false);
    K.gemm_nn(h.rows, upd, h.cols, h.data.data(), wt->values.data(), t->data.data(), false);
    for (std::size_t i = 0; i < in.rows; ++i) {
        K.vadd(upd, s->row(i), bs->values.data(), s->row(i));
        K.vadd(upd, t->row(i), bt->values.data(), t->row(i));
    }
}

void FlowModel::build_graph() {
    Graph& g = graph_;
    in_alpha_ = g.input("alpha", cfg_.dim);
    const int shift_ref = g.param_ref(a_shift_.get(), 1, cfg_.dim);
    const int inv_scale_ref = g.param_ref(a_inv_scale_.get(), 1, cfg_.dim);
    const int std_alpha = g.mul(g.add(in_alpha_, g.mul(shift_ref, g.scalar(-1.0))), inv_scale_ref);

    int cond_all = -1;
    if (cfg_.cond_dim > 0) {
        in_c_ = g.input("c", cfg_.cond_dim);
        const int csh = g.param_ref(c_shift_.get(), 1, cfg_.cond_dim);
        const int cis = g.param_ref(c_inv_scale_.get(), 1, cfg_.cond_dim);
        cond_all = g.mul(g.add(in_c_, g.mul(csh, g.scalar(-1.0))), cis);
    }

    // standardization log-Jacobian, constant across rows
    int logdet = g.row_sum(g.log_op(inv_scale_ref));

    std::vector<int> frozen(block_sizes_.size(), -1);
    for (auto& stage : stages_) {
        const int survivors = g.slice(std_alpha, 0, stage.offset);
        const int stage_cond =
            cond_all >= 0 ? g.concat({survivors, cond_all}) : survivors;
        int d_cur = g.slice(std_alpha, stage.offset, stage.offset + stage.size);
        for (std::size_t l = 0; l < stage.couplings.size(); ++l) {
            const Coupling& cp = stage.couplings[l];
            const std::size_t given = cp.given_hi - cp.given_lo;
            int given_node = -1;
            int cond_in = stage_cond;
            if (given > 0) {
                given_node = g.slice(d_cur, cp.given_lo, cp.given_hi);
                cond_in = g.concat({given_node, stage_cond});
            }
            const int upd_node = g.slice(d_cur, cp.upd_lo, cp.upd_hi);
            const int hidden = cp.net.trunk.emit(g, cond_in);
            const int s_head = g.dense(hidden, cp.net.ws.get(), cp.net.bs.get());
            const int t_head = g.dense(hidden, cp.net.wt.get(), cp.net.bt.get());
            const int scale = g.affine_const(g.tanh_op(s_head), cfg_.gamma, 1.0);
            const int beta_ref = g.param_ref(cp.beta.get(), 1, cp.beta->shape[1]);
            const int shifted = g.mul(g.exp_op(beta_ref), g.tanh_op(t_head));
            const int new_upd = g.add(g.mul(upd_node, scale), shifted);
            logdet = g.add(logdet, g.row_sum(g.log_op(scale)));
            if (given > 0) {
                d_cur = cp.upd_lo == 0 ? g.concat({new_upd, given_node})
                                       : g.concat({given_node, new_upd});
            } else {
                d_cur = new_upd;
            }
            const std::string lname =
                "stage" + std::to_string(stage.block) + "/coupling" + std::to_string(l);
            layer_nodes_.emplace_back(lname, d_cur);

            const ScaleBias& sb = stage.scale_biases[l];
            const int s_ref = g.param_ref(sb.s.get(), 1, stage.size);
            const int b_ref = g.param_ref(sb.b.get(), 1, stage.size);
            d_cur = g.add(g.mul(d_cur, g.exp_op(s_ref)), b_ref);
            logdet = g.add(logdet, g.row_sum(s_ref));
            layer_nodes_.emplace_back(
                "stage" + std::to_string(stage.block) + "/scale_bias" + std::to_string(l), d_cur);
        }
        frozen[stage.block] = d_cur;
    }

    const int block0 = g.slice(std_alpha, 0, block_sizes_[0]);
    auto [y0, ld0] = g.pwl_cdf(block0, cdf_theta_.get());
    logdet = g.add(logdet, g.row_sum(ld0));
    layer_nodes_.emplace_back("terminal/pwl", y0);
    frozen[0] = y0;

    std::vector<int> parts;
    for (std::size_t b = 0; b < block_sizes_.size(); ++b) parts.push_back(frozen[b]);
    const int z = parts.size() == 1 ? parts[0] : g.concat(parts);

    const int quad = g.row_sum(g.mul(z, z));
    const int logp =
        g.affine_const(quad, -0.5, -0.5 * static_cast<double>(cfg_.dim) * kLog2Pi);
    const int logdens = g.add(logp, logdet);
    const int loss = g.mul(g.mean_all(logdens), g.scalar(-1.0));

    z_node_ = z;
    logdet_node_ = logdet;
    logdens_node_ = logdens;
    loss_node_ = loss;
    g.mark_output("z", z);
    g.mark_output("logdet", logdet);
    g.mark_output("logdens", logdens);
    g.mark_output("loss", loss);
}

// ---------------------------------------------------------------------------
// standardization

void FlowModel::freeze_standardization(const Matrix& alpha, const Matrix& c) {
    auto freeze = [](const Matrix& m, ParameterTensor& shift, ParameterTensor& inv_scale) {
        const std::size_t n = m.rows, d = m.cols;
        if (n < 2) throw ConfigError("flow: need at least 2 rows to standardize");
        for (std::size_t j = 0; j < d; ++j) {
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) mean += m(i, j);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double dv = m(i, j) - mean;
                var += dv * dv;
            }
            var /= static_cast<double>(n);
            const double sd = std::sqrt(var);
            shift.values[j] = mean;
            inv_scale.values[j] = sd > 1e-12 ? 1.0 / sd : 1.0;
        }
    };
    freeze(alpha, *a_shift_, *a_inv_scale_);
    if (cfg_.cond_dim > 0) freeze(c, *c_shift_, *c_inv_scale_);
}

Matrix FlowModel::standardize_alpha(const Matrix& alpha) const {
    Matrix out(alpha.rows, alpha.cols);
    for (std::size_t i = 0; i < alpha.rows; ++i)
        for (std::size_t j = 0; j < alpha.cols; ++j)
            out(i, j) = (alpha(i, j) - a_shift_->values[j]) * a_inv_scale_->values[j];
    return out;
}

Matrix FlowModel::standardize_cond(const Matrix& c) const {
    Matrix out(c.rows, cfg_.cond_dim);
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < cfg_.cond_dim; ++j)
            out(i, j) = (c(i, j) - c_shift_->values[j]) * c_inv_scale_->values[j];
    return out;
}

// ---------------------------------------------------------------------------
// evaluation

void FlowModel::check_finite_layers() const {
    for (const auto& [name, node] : layer_nodes_) {
        const Matrix& v = graph_.value(node);
        for (double x : v.data) {
            if (!std::isfinite(x))
                throw NumericError("flow: non-finite values at layer '" + name + "'");
        }
    }
}

void FlowModel::forward_logdet(const Matrix& alpha, const Matrix& c, Matrix* z, Vec* logdet) {
    if (alpha.cols != cfg_.dim) throw ConfigError("flow: alpha width mismatch");
    std::map<std::string, const Matrix*> ins{{"alpha", &alpha}};
    if (cfg_.cond_dim > 0) {
        if (c.rows != alpha.rows || c.cols != cfg_.cond_dim)
            throw ConfigError("flow: conditioner width/row mismatch");
        ins["c"] = &c;
    }
    graph_.forward_eval(ins);
    check_finite_layers();
    if (z != nullptr) *z = graph_.value(z_node_);
    if (logdet != nullptr) {
        const Matrix& ld = graph_.value(logdet_node_);
        logdet->assign(ld.data.begin(), ld.data.end());
    }
}

double FlowModel::forward_loss(const Matrix& alpha, const Matrix& c) {
    forward_logdet(alpha, c, nullptr, nullptr);
    return graph_.value(loss_node_)(0, 0);
}

Vec FlowModel::log_density(const Matrix& alpha, const Matrix& c) {
    Vec out(alpha.rows);
    for (std::size_t start = 0; start < alpha.rows; start += kEvalChunk) {
        const std::size_t count = std::min(kEvalChunk, alpha.rows - start);
        Matrix ac(count, alpha.cols), cc;
        for (std::size_t i = 0; i < count; ++i)
            std::copy_n(alpha.row(start + i), alpha.cols, ac.row(i));
        if (cfg_.cond_dim > 0) {
            cc.resize(count, cfg_.cond_dim);
            for (std::size_t i = 0; i < count; ++i)
                std::copy_n(c.row(start + i), cfg_.cond_dim, cc.row(i));
        }
        forward_logdet(ac, cc, nullptr, nullptr);
        const Matrix& ld = graph_.value(logdens_node_);
        for (std::size_t i = 0; i < count; ++i) out[start + i] = ld(i, 0);
    }
    return out;
}

double FlowModel::mean_nll(const Matrix& alpha, const Matrix& c) {
    const Vec ld = log_density(alpha, c);
    double s = 0.0;
    for (double v : ld) s += v;
    return -s / static_cast<double>(ld.size());
}

Matrix FlowModel::inverse(const Matrix& z, const Matrix& c) {
    if (z.cols != cfg_.dim) throw ConfigError("flow: z width mismatch");
    const std::size_t n = z.rows;
    Matrix std_c;
    if (cfg_.cond_dim > 0) std_c = standardize_cond(c);
    Matrix out(n, cfg_.dim);

    // leading block through the inverse terminal bijection
    const PwlTables tables = pwl_tables(*cdf_theta_);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < block_sizes_[0]; ++j)
            out(i, j) = pwl_inverse_point(tables, j, z(i, j));

    // remaining blocks in ascending index order (reverse of transform order)
    for (auto it = stages_.rbegin(); it != stages_.rend(); ++it) {
        const Stage& stage = *it;
        Matrix cond_all(n, stage.offset + cfg_.cond_dim);
        for (std::size_t i = 0; i < n; ++i) {
            std::copy_n(out.row(i), stage.offset, cond_all.row(i));
            if (cfg_.cond_dim > 0)
                std::copy_n(std_c.row(i), cfg_.cond_dim, cond_all.row(i) + stage.offset);
        }
        Matrix d(n, stage.size);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(z.row(i) + stage.offset, stage.size, d.row(i));

        for (std::size_t l = stage.couplings.size(); l-- > 0;) {
            const ScaleBias& sb = stage.scale_biases[l];
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < stage.size; ++j)
                    d(i, j) = (d(i, j) - sb.b->values[j]) * std::exp(-sb.s->values[j]);

            const Coupling& cp = stage.couplings[l];
            const std::size_t given = cp.given_hi - cp.given_lo;
            const std::size_t upd = cp.upd_hi - cp.upd_lo;
            Matrix cond_in(n, given + cond_all.cols);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(d.row(i) + cp.given_lo, given, cond_in.row(i));
                std::copy_n(cond_all.row(i), cond_all.cols, cond_in.row(i) + given);
            }
            Matrix s, t;
            cp.net.eval(cond_in, &s, &t);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < upd; ++j) {
                    const double scale = 1.0 + cfg_.gamma * std::tanh(s(i, j));
                    const double shift = std::exp(cp.beta->values[j]) * std::tanh(t(i, j));
                    d(i, cp.upd_lo + j) = (d(i, cp.upd_lo + j) - shift) / scale;
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(d.row(i), stage.size, out.row(i) + stage.offset);
    }

    // de-standardize
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cfg_.dim; ++j)
            out(i, j) = a_shift_->values[j] + out(i, j) / a_inv_scale_->values[j];
    return out;
}

Matrix FlowModel::sample_conditional(const Matrix& c, std::size_t n, std::uint64_t seed) {
    if (cfg_.cond_dim > 0 && c.rows != n)
        throw ConfigError("flow: sample_conditional needs one conditioner row per sample");
    Rng rng(seed);
    Matrix z(n, cfg_.dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < cfg_.dim; ++j) z(i, j) = rng.normal();
    return inverse(z, c);
}

std::vector<ParameterTensor*> FlowModel::parameters() {
    std::vector<ParameterTensor*> out;
    for (auto& stage : stages_) {
        for (auto& cp : stage.couplings) {
            for (auto* p : cp.net.trunk.parameters()) out.push_back(p);
            out.push_back(cp.net.ws.get());
            out.push_back(cp.net.bs.get());
            out.push_back(cp.net.wt.get());
            out.push_back(cp.net.bt.get());
            out.push_back(cp.beta.get());
        }
        for (auto& sb : stage.scale_biases) {
            out.push_back(sb.s.get());
            out.push_back(sb.b.get());
        }
    }
    out.push_back(cdf_theta_.get());
    return out;
}

// ---------------------------------------------------------------------------
// checkpointing

std::vector<CheckpointEntry> FlowModel::to_checkpoint() const {
    std::vector<CheckpointEntry> entries;
    CheckpointEntry meta;
    meta.kind = CheckpointEntry::Meta;
    meta.name = "flow.meta";
    meta.dims = {8};
    meta.data = {static_cast<double>(cfg_.dim),
                 static_cast<double>(cfg_.cond_dim),
                 static_cast<double>(cfg_.stages),
                 static_cast<double>(cfg_.couplings_per_stage),
                 static_cast<double>(cfg_.hidden_width),
                 static_cast<double>(static_cast<int>(cfg_.conditioner_act)),
                 cfg_.gamma,
                 static_cast<double>(cfg_.cdf_bins)};
    entries.push_back(std::move(meta));

    auto push_buffer = [&entries](const ParameterTensor* p) {
        if (p == nullptr) return;
        CheckpointEntry e;
        e.kind = CheckpointEntry::Buffer;
        e.name = p->name;
        e.dims = p->shape;
        e.data = p->values;
        entries.push_back(std::move(e));
    };
    push_buffer(a_shift_.get());
    push_buffer(a_inv_scale_.get());
    push_buffer(c_shift_.get());
    push_buffer(c_inv_scale_.get());

    auto* self = const_cast<FlowModel*>(this);
    for (auto* p : self->parameters()) {
        CheckpointEntry e;
        e.kind = CheckpointEntry::Parameter;
        e.name = p->name;
        e.dims = p->shape;
        e.data = p->values;
        entries.push_back(std::move(e));
    }
    return entries;
}

FlowModel FlowModel::from_checkpoint(const std::vector<CheckpointEntry>& entries) {
    const auto& meta = checkpoint_find(entries, "flow.meta");
    if (meta.data.size() != 8) throw UsageError("flow checkpoint: bad meta entry");
    FlowConfig cfg;
    cfg.dim = static_cast<std::size_t>(meta.data[0]);
    cfg.cond_dim = static_cast<std::size_t>(meta.data[1]);
    cfg.stages = static_cast<std::size_t>(meta.data[2]);
    cfg.couplings_per_stage = static_cast<std::size_t>(meta.data[3]);
    cfg.hidden_width = static_cast<std::size_t>(meta.data[4]);
    cfg.conditioner_act = static_cast<Activation>(static_cast<int>(meta.data[5]));
    cfg.gamma = meta.data[6];
    cfg.cdf_bins = static_cast<std::size_t>(meta.data[7]);
    Rng rng(0);
    FlowModel model(cfg, rng);

    auto fill = [&entries](ParameterTensor* p) {
        if (p == nullptr) return;
        const auto& e = checkpoint_find(entries, p->name);
        if (e.data.size() != p->size())
            throw UsageError("flow checkpoint: size mismatch for '" + p->name + "'");
        p->values = e.data;
    };
    fill(model.a_shift_.get());
    fill(model.a_inv_scale_.get());
    fill(model.c_shift_.get());
    fill(model.c_inv_scale_.get());
    for (auto* p : model.parameters()) fill(p);
    return model;
}

// ---------------------------------------------------------------------------
// training

FlowTrainResult train_flow(FlowModel& model, const Matrix& alpha, const Matrix& c,
                           const FlowTrainConfig& cfg) {
    FlowTrainResult result;
    if (cfg.epochs == 0) return result;
    const std::size_t n = alpha.rows;
    if (n < cfg.batch)
        throw ConfigError("train_flow: dataset of " + std::to_string(n) +
                          " rows is smaller than batch size " + std::to_string(cfg.batch));

    model.freeze_standardization(alpha, c);

    Rng rng(cfg.seed);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i-- > 1;) std::swap(perm[i], perm[rng.below(i + 1)]);

    const std::size_t n_hold = static_cast<std::size_t>(
        cfg.holdout_fraction * static_cast<double>(n));
    const std::size_t n_train = n - n_hold;
    std::vector<std::size_t> hold_idx(perm.begin(), perm.begin() + n_hold);
    std::vector<std::size_t> train_idx(perm.begin() + n_hold, perm.end());

    const bool cond = model.config().cond_dim > 0;
    Matrix hold_a = gather_rows(alpha, hold_idx, 0, n_hold);
    Matrix hold_c = cond && n_hold > 0 ? gather_rows(c, hold_idx, 0, n_hold) : Matrix();

    Matrix train_a_all = gather_rows(alpha, train_idx, 0, n_train);
    Matrix train_c_all = cond ? gather_rows(c, train_idx, 0, n_train) : Matrix();
    result.initial_train_nll = model.mean_nll(train_a_all, train_c_all);

    AdamConfig acfg;
    acfg.lr = cfg.lr;
    Adam opt(model.parameters(), acfg);

    const std::size_t batch = std::min(cfg.batch, n_train);
    const std::size_t n_batches = n_train / batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n_train; i-- > 1;) std::swap(train_idx[i], train_idx[rng.below(i + 1)]);
        double epoch_loss = 0.0;
        for (std::size_t bidx = 0; bidx < n_batches; ++bidx) {
            Matrix ab = gather_rows(alpha, train_idx, bidx * batch, batch);
            Matrix cb = cond ? gather_rows(c, train_idx, bidx * batch, batch) : Matrix();
            const double loss = model.forward_loss(ab, cb);
            if (!std::isfinite(loss))
                throw NumericError("train_flow: non-finite loss at epoch " + std::to_string(epoch) +
                                   " batch " + std::to_string(bidx));
            epoch_loss += loss;
            model.graph().backward_grad(model.loss_node());
            opt.step();
        }
        if (n_hold > 0) {
            result.holdout_nll.push_back(model.mean_nll(hold_a, hold_c));
        } else {
            result.holdout_nll.push_back(epoch_loss / static_cast<double>(n_batches));
        }
        if (cfg.on_epoch) cfg.on_epoch(epoch + 1);
    }
    result.final_train_nll = model.mean_nll(train_a_all, train_c_all);
    return result;
}

}  // namespace ckr
