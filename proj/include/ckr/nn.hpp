#ifndef CKR_NN_HPP
#define CKR_NN_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ckr/graph.hpp"
#include "ckr/rng.hpp"
#include "ckr/tensor.hpp"

namespace ckr {

enum class Activation { Identity, Tanh, Relu, LeakyRelu };

void apply_activation(Activation act, Matrix& m);

// Uniform Glorot initialization on +-sqrt(6/(fan_in+fan_out)); biases stay 0.
void init_dense_glorot(ParameterTensor& w, Rng& rng);

// Fully connected stack. Emits ops into a Graph for training and offers a
// plain kernel-path eval for gradient-free use; both run the same kernels in
// the same order so results match bitwise.
class Mlp {
  public:
    Mlp() = default;
    // widths = {in, h1, ..., out}; hidden activations `act`. The last layer
    // is linear unless act_last; zero_last zero-initializes its weights.
    Mlp(const std::string& name, const std::vector<std::size_t>& widths, Activation act,
        Rng& rng, bool zero_last = false, bool act_last = false);

    int emit(Graph& g, int x) const;
    Matrix eval(const Matrix& x) const;
    std::vector<ParameterTensor*> parameters();
    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return out_dim_; }

    struct Layer {
        std::unique_ptr<ParameterTensor> w, b;
        Activation act;
    };
    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

  private:
    std::vector<Layer> layers_;
    std::size_t in_dim_ = 0, out_dim_ = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over a fixed parameter set. Gradients are consumed and
// zeroed by step(); a non-finite gradient aborts the step before any state,
// parameter, or moment is touched.
class Adam {
  public:
    explicit Adam(std::vector<ParameterTensor*> params, AdamConfig cfg = AdamConfig());
    void step();
    std::int64_t steps_taken() const { return t_; }
    AdamConfig& config() { return cfg_; }

  private:
    std::vector<ParameterTensor*> params_;
    std::vector<std::vector<double>> m_, v_;
    AdamConfig cfg_;
    std::int64_t t_ = 0;
};

}  // namespace ckr

#endif
