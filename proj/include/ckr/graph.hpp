#ifndef CKR_GRAPH_HPP
#define CKR_GRAPH_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ckr/tensor.hpp"

namespace ckr {

// Reverse-mode tape over dense matrices.
//
// A Graph is built once and re-run on batches of any row count: node column
// widths are fixed at build time, rows follow the bound inputs. Records are
// stored in emission (topological) order; backward replays them in exact
// reverse order. Binary elementwise ops broadcast a [1 x d] or [1 x 1]
// operand over the batch.
class Graph {
  public:
    enum class Op {
        Input, Const, ParamRef, Dense, Tanh, Relu, LeakyRelu, Sigmoid, Exp, Log,
        Add, Mul, RowSum, MeanAll, Concat, Slice, PwlCdf
    };

    static const char* op_name(Op op);

    // --- construction ---------------------------------------------------
    int input(const std::string& name, std::size_t cols);
    int constant(const Matrix& value);
    int scalar(double value);  // shorthand for a [1 x 1] constant
    int param_ref(ParameterTensor* p, std::size_t rows, std::size_t cols);
    int dense(int x, ParameterTensor* w, ParameterTensor* b);  // b may be null
    int tanh_op(int x);
    int relu(int x);
    int leaky_relu(int x, double slope = 0.01);
    int sigmoid(int x);
    int exp_op(int x);
    int log_op(int x);
    int add(int a, int b);
    int mul(int a, int b);
    int row_sum(int x);   // [n x d] -> [n x 1]
    int mean_all(int x);  // [n x d] -> [1 x 1]
    int concat(const std::vector<int>& xs);
    int slice(int x, std::size_t col_begin, std::size_t col_end);
    // Elementwise monotone piecewise-linear CDF map with trainable positive
    // bin slopes; theta has shape [cols x n_bins]. Returns (y, log dy/du).
    std::pair<int, int> pwl_cdf(int x, ParameterTensor* theta);

    // y = a*x + b with scalar constants (sugar over Const/Mul/Add)
    int affine_const(int x, double a, double b);

    void mark_output(const std::string& name, int node);

    // --- execution --------------------------------------------------------
    // Binds the named inputs and runs all records in order. Missing inputs or
    // shape mismatches raise ConfigError naming the op id.
    void forward_eval(const std::map<std::string, const Matrix*>& inputs);
    // Accumulates d(loss)/d(param) into every trainable ParameterTensor.grad.
    // loss must be a [1 x 1] node and forward_eval must have run.
    void backward_grad(int loss_node);

    const Matrix& value(int node) const { return nodes_[node].value; }
    const Matrix& output(const std::string& name) const;
    std::size_t cols(int node) const { return nodes_[node].cols; }

    // Unique parameters in first-reference order.
    std::vector<ParameterTensor*> parameters() const;

  private:
    struct Node {
        std::size_t cols = 0;
        Matrix value;
        Matrix grad;
        bool fixed = false;  // Const nodes keep their build-time value
    };
    struct Record {
        Op op;
        std::vector<int> ins;
        std::vector<int> outs;
        ParameterTensor* w = nullptr;
        ParameterTensor* b = nullptr;
        double slope = 0.0;       // LeakyRelu
        std::size_t c0 = 0, c1 = 0;  // Slice
        int scratch = -1;         // PwlCdf cache slot
    };
    // Per-element cache for the piecewise-linear bijection backward pass.
    struct PwlScratch {
        Matrix u, bin, v, onemv, lu, logv, log1mv;
        Matrix hbar, loghbar;  // [dims x n_bins] slope tables from the current theta
    };

    int new_node(std::size_t cols);
    void run_record(const Record& rec, std::size_t rec_idx);
    void back_record(const Record& rec);
    void forward_pwl(const Record& rec, std::size_t rec_idx);
    void backward_pwl(const Record& rec);
    void check_built(int node) const;

    std::vector<Node> nodes_;
    std::vector<Record> records_;
    std::vector<PwlScratch> pwl_scratch_;
    std::map<std::string, int> inputs_;
    std::map<std::string, int> outputs_;
    bool forward_done_ = false;
};

}  // namespace ckr

#endif
