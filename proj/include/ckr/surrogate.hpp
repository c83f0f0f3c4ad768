#ifndef CKR_SURROGATE_HPP
#define CKR_SURROGATE_HPP

#include <cstdint>
#include <memory>
#include <vector>

#include "ckr/checkpoint.hpp"
#include "ckr/graph.hpp"
#include "ckr/nn.hpp"
#include "ckr/rng.hpp"

namespace ckr {

struct SurrogateConfig {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::size_t width = 64;        // hidden width
    std::size_t blocks = 5;        // residual blocks, two dense layers each
    std::size_t batch = 256;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;     // early stopping on validation MSE
    double lr = 1e-3;
    double holdout_fraction = 0.1;
    std::uint64_t seed = 0;
};

// Residual regression network h~(xi, tau): input projection to the hidden
// width, `blocks` residual blocks (two dense layers with a skip connection,
// LeakyReLU), linear readout. Inputs and outputs are standardized with
// statistics frozen from the training data.
class CouplingSurrogate {
  public:
    CouplingSurrogate(const SurrogateConfig& cfg, Rng& rng);

    // standardize -> network -> de-standardize; pure and deterministic
    Matrix eval(const Matrix& x) const;
    Vec eval_one(const Vec& x) const;

    void freeze_standardization(const Matrix& x, const Matrix& y);

    std::vector<ParameterTensor*> parameters();
    const SurrogateConfig& config() const { return cfg_; }

    std::vector<CheckpointEntry> to_checkpoint() const;
    static CouplingSurrogate from_checkpoint(const std::vector<CheckpointEntry>& entries);

    // training support
    Graph& graph() { return graph_; }
    int loss_node() const { return loss_node_; }
    double forward_loss(const Matrix& x_std, const Matrix& y_std);
    Vec snapshot_values() const;
    void restore_values(const Vec& values);
    Matrix standardize_in(const Matrix& x) const;
    Matrix standardize_out(const Matrix& y) const;

  private:
    void build_graph();
    Matrix net_forward(const Matrix& x_std) const;

    SurrogateConfig cfg_;
    std::unique_ptr<ParameterTensor> w_in_, b_in_, w_out_, b_out_;
    struct Block {
        std::unique_ptr<ParameterTensor> w1, b1, w2, b2;
    };
    std::vector<Block> blocks_;
    std::unique_ptr<ParameterTensor> in_shift_, in_inv_scale_, out_shift_, out_scale_;

    Graph graph_;
    int in_node_ = -1, target_node_ = -1, pred_node_ = -1, loss_node_ = -1;
};

struct SurrogateTrainResult {
    std::vector<double> val_mse;  // per epoch
    double best_val_mse = 0.0;
    std::size_t best_epoch = 0;
};

// Minimizes mean squared error with Adam; keeps the best-validation
// parameters; stops early after `patience` epochs without improvement.
SurrogateTrainResult train_surrogate(CouplingSurrogate& model, const Matrix& x, const Matrix& y,
                                     const SurrogateConfig& cfg);

}  // namespace ckr

#endif
