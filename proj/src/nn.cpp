#include "ckr/nn.hpp"

#include <cmath>

#include "ckr/kernels.hpp"

namespace ckr {

void apply_activation(Activation act, Matrix& m) {
    switch (act) {
        case Activation::Identity:
            break;
        case Activation::Tanh:
            for (auto& v : m.data) v = std::tanh(v);
            break;
        case Activation::Relu:
            for (auto& v : m.data) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::LeakyRelu:
            for (auto& v : m.data) v = v > 0.0 ? v : 0.01 * v;
            break;
    }
}

void init_dense_glorot(ParameterTensor& w, Rng& rng) {
    const double fan_in = static_cast<double>(w.shape[0]);
    const double fan_out = static_cast<double>(w.shape[1]);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (auto& v : w.values) v = rng.uniform(-bound, bound);
}

Mlp::Mlp(const std::string& name, const std::vector<std::size_t>& widths, Activation act,
         Rng& rng, bool zero_last, bool act_last) {
    if (widths.size() < 2) throw ConfigError("mlp '" + name + "': need at least two widths");
    in_dim_ = widths.front();
    out_dim_ = widths.back();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        Layer layer;
        const std::string tag = name + ".l" + std::to_string(l);
        layer.w = std::make_unique<ParameterTensor>(tag + ".w",
                                                    std::vector<std::size_t>{widths[l], widths[l + 1]});
        layer.b = std::make_unique<ParameterTensor>(tag + ".b", std::vector<std::size_t>{1, widths[l + 1]});
        const bool last = l + 2 == widths.size();
        if (!(last && zero_last)) init_dense_glorot(*layer.w, rng);
        layer.act = (last && !act_last) ? Activation::Identity : act;
        layers_.push_back(std::move(layer));
    }
}

int Mlp::emit(Graph& g, int x) const {
    int cur = x;
    for (const auto& layer : layers_) {
        cur = g.dense(cur, layer.w.get(), layer.b.get());
        switch (layer.act) {
            case Activation::Identity: break;
            case Activation::Tanh: cur = g.tanh_op(cur); break;
            case Activation::Relu: cur = g.relu(cur); break;
            case Activation::LeakyRelu: cur = g.leaky_relu(cur); break;
        }
    }
    return cur;
}

Matrix Mlp::eval(const Matrix& x) const {
    const auto& K = kern::active();
    Matrix cur = x;
    Matrix next;
    for (const auto& layer : layers_) {
        const std::size_t in = layer.w->shape[0], out = layer.w->shape[1];
        if (cur.cols != in) throw ConfigError("mlp eval: input width mismatch");
        next.resize(cur.rows, out);
        K.gemm_nn(cur.rows, out, in, cur.data.data(), layer.w->values.data(), next.data.data(), false);
        for (std::size_t i = 0; i < cur.rows; ++i)
            K.vadd(out, next.row(i), layer.b->values.data(), next.row(i));
        apply_activation(layer.act, next);
        std::swap(cur, next);
    }
    return cur;
}

std::vector<ParameterTensor*> Mlp::parameters() {
    std::vector<ParameterTensor*> out;
    for (auto& layer : layers_) {
        out.push_back(layer.w.get());
        out.push_back(layer.b.get());
    }
    return out;
}

Adam::Adam(std::vector<ParameterTensor*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const auto* p : params_) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    for (const auto* p : params_) {
        if (!p->trainable) continue;
        for (double gv : p->grad) {
            if (!std::isfinite(gv))
                throw NumericError("adam: non-finite gradient in parameter '" + p->name + "'");
        }
    }
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        ParameterTensor& p = *params_[pi];
        if (!p.trainable) continue;
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad[i];
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.values[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
        p.zero_grad();
    }
}

}  // namespace ckr
