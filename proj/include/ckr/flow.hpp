#ifndef CKR_FLOW_HPP
#define CKR_FLOW_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ckr/checkpoint.hpp"
#include "ckr/graph.hpp"
#include "ckr/nn.hpp"
#include "ckr/rng.hpp"

namespace ckr {

// Anything that can score alpha given c; flows and analytic test densities
// both satisfy it.
struct ConditionalDensity {
    virtual ~ConditionalDensity() = default;
    virtual Vec log_density(const Matrix& alpha, const Matrix& c) = 0;
};

struct FlowConfig {
    std::size_t dim = 0;       // |alpha|
    std::size_t cond_dim = 0;  // |c|; 0 gives the unconditional KRnet
    std::size_t stages = 2;    // R, counting the terminal nonlinear layer
    std::size_t couplings_per_stage = 4;  // L
    std::size_t hidden_width = 32;        // conditioner trunk width
    Activation conditioner_act = Activation::Relu;
    double gamma = 0.6;        // coupling scale bound, in (0,1)
    std::size_t cdf_bins = 32; // terminal bijection bins per dimension
};

// Invertible map z = f(alpha; c) with Knothe-Rosenblatt block-triangular
// structure. alpha splits into R blocks in natural index order; stage r
// (r = 1..R-1) transforms the trailing unfrozen block through L conditional
// affine coupling layers (alternating which half of the block updates), each
// followed by a scale-bias layer, conditioned on all earlier blocks plus c;
// the block is then frozen and bypasses later stages. The leading block goes
// through an elementwise monotone piecewise-linear CDF bijection that does
// not see c. Inputs are standardized with statistics frozen from training
// data; the prior is standard normal. Densities come from the change of
// variables with exact per-layer log-Jacobians.
class FlowModel final : public ConditionalDensity {
  public:
    FlowModel(const FlowConfig& cfg, Rng& rng);

    const FlowConfig& config() const { return cfg_; }
    const std::vector<std::size_t>& block_sizes() const { return block_sizes_; }

    // Per-dimension shift/scale from data; idempotent until called again.
    void freeze_standardization(const Matrix& alpha, const Matrix& c);

    // z and per-row log|det df/dalpha| (standardization included).
    void forward_logdet(const Matrix& alpha, const Matrix& c, Matrix* z, Vec* logdet);
    // log p(alpha | c); chunks internally, any row count.
    Vec log_density(const Matrix& alpha, const Matrix& c) override;
    // Exact inverse of forward_logdet's map.
    Matrix inverse(const Matrix& z, const Matrix& c);
    // Draw n samples through the inverse map; c must have n rows (ignored
    // when unconditional). Deterministic per seed.
    Matrix sample_conditional(const Matrix& c, std::size_t n, std::uint64_t seed);

    // Mean negative log-likelihood of a dataset.
    double mean_nll(const Matrix& alpha, const Matrix& c);

    std::vector<ParameterTensor*> parameters();
    std::vector<CheckpointEntry> to_checkpoint() const;
    static FlowModel from_checkpoint(const std::vector<CheckpointEntry>& entries);

    // Training entry points used by train_flow.
    Graph& graph() { return graph_; }
    int loss_node() const { return loss_node_; }
    double forward_loss(const Matrix& alpha, const Matrix& c);

  private:
    struct CondNet {
        Mlp trunk;                        // (given ++ cond) -> hidden
        std::unique_ptr<ParameterTensor> ws, bs, wt, bt;  // two heads
        void eval(const Matrix& in, Matrix* s, Matrix* t) const;
    };
    struct Coupling {
        std::size_t given_lo = 0, given_hi = 0;    // columns of the block kept fixed
        std::size_t upd_lo = 0, upd_hi = 0;        // columns of the block updated
        CondNet net;
        std::unique_ptr<ParameterTensor> beta;     // [1 x |upd|]
    };
    struct ScaleBias {
        std::unique_ptr<ParameterTensor> s, b;     // [1 x block]
    };
    struct Stage {
        std::size_t block = 0;      // block index transformed by this stage
        std::size_t offset = 0, size = 0;
        std::vector<Coupling> couplings;
        std::vector<ScaleBias> scale_biases;
    };

    void build_graph();
    void check_finite_layers() const;
    Matrix standardize_alpha(const Matrix& alpha) const;
    Matrix standardize_cond(const Matrix& c) const;

    FlowConfig cfg_;
    std::vector<std::size_t> block_sizes_;   // natural index order, block 0 first
    std::vector<std::size_t> block_offsets_;
    std::vector<Stage> stages_;              // transform order: trailing block first
    std::unique_ptr<ParameterTensor> cdf_theta_;  // [block0 x bins]
    // standardization buffers (non-trainable)
    std::unique_ptr<ParameterTensor> a_shift_, a_inv_scale_, c_shift_, c_inv_scale_;

    Graph graph_;
    int in_alpha_ = -1, in_c_ = -1;
    int z_node_ = -1, logdet_node_ = -1, logdens_node_ = -1, loss_node_ = -1;
    std::vector<std::pair<std::string, int>> layer_nodes_;  // for finite checks
};

struct FlowTrainConfig {
    std::size_t batch = 500;     // N_b
    std::size_t epochs = 100;    // N_e
    double lr = 1e-3;            // eta
    std::uint64_t seed = 0;
    double holdout_fraction = 0.1;
    // invoked after each epoch (1-based); used for per-epoch metrics
    std::function<void(std::size_t)> on_epoch;
};

struct FlowTrainResult {
    std::vector<double> holdout_nll;  // one entry per epoch
    double initial_train_nll = 0.0;
    double final_train_nll = 0.0;
};

// Maximum-likelihood training with reshuffled mini-batches per epoch.
FlowTrainResult train_flow(FlowModel& model, const Matrix& alpha, const Matrix& c,
                           const FlowTrainConfig& cfg);

}  // namespace ckr

#endif
