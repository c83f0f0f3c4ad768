#ifndef CKR_PIPELINE_HPP
#define CKR_PIPELINE_HPP

#include <map>
#include <optional>
#include <string>

#include "ckr/config.hpp"
#include "ckr/dduq.hpp"
#include "ckr/flow.hpp"
#include "ckr/sampletable.hpp"
#include "ckr/stats.hpp"
#include "ckr/surrogate.hpp"

namespace ckr {

// Stage orchestration over one output directory. Every stage reads the
// artifacts of its prerequisites from the directory and writes its own;
// missing prerequisites raise UsageError naming the file and the stage that
// produces it. With a fixed config and seed each stage rewrites its
// artifacts bitwise-identically in single-worker mode.
class Pipeline {
  public:
    Pipeline(PipelineConfig cfg, std::string out_dir, int workers = 1,
             std::optional<std::uint64_t> seed_override = std::nullopt);

    // stage in {prep, offline, surrogate, online, report, flow-bench}
    void run_stage(const std::string& stage);

    void prep();
    void offline();
    void surrogates();
    void online();
    void report();
    void flow_bench();

    const PipelineConfig& config() const { return cfg_; }
    const std::string& out_dir() const { return out_; }

    // artifact paths
    std::string path_kl(int i) const;
    std::string path_pod(int from, int to) const;
    std::string path_proposal(int i) const;
    std::string path_offline(int i) const;
    std::string path_surrogate(int from, int to) const;
    std::string path_online(int i) const;
    std::string path_flow(int i) const;
    std::string path_reference() const;
    std::string path_diagnostics() const;
    std::string path_report() const;

    // loaded-artifact access for tests and the acceptance suite
    KLBasis load_kl(int i) const;
    PODBasis load_pod(int from, int to) const;
    GaussianProposal load_proposal(int i) const;
    SampleTable load_offline(int i) const;
    SampleTable load_online(int i) const;
    SampleTable load_reference() const;

    std::uint64_t base_seed() const { return seed_; }
    std::uint64_t stage_sample_seed(std::uint64_t tag) const;

  private:
    void append_manifest(const std::string& stage);
    void require_file(const std::string& path, const std::string& producer) const;

    PipelineConfig cfg_;
    std::string out_;
    int workers_;
    std::uint64_t seed_;
    std::vector<Mesh2D> meshes_;
};

// Mixture benchmark pieces, reusable by the acceptance suite.
struct BenchCaseResult {
    std::size_t cond_dim = 0;
    std::vector<double> delta_ckr;  // per epoch, on the per-epoch validation subset
    std::vector<double> delta_kr;
    double final_delta_ckr = 0.0;   // on the full validation set
    double final_delta_kr = 0.0;
};

// The 16-d three-component Gaussian mixture of the benchmark; covariance
// factors have uniform [0,1] entries drawn from cov_seed.
MixtureLaw benchmark_mixture(std::size_t dim, std::uint64_t cov_seed);

BenchCaseResult run_bench_case(const MixtureLaw& mixture, const BenchSection& bench,
                               std::size_t cond_dim, std::uint64_t seed);

}  // namespace ckr

#endif
