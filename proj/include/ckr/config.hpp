#ifndef CKR_CONFIG_HPP
#define CKR_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ckr/ddcore.hpp"
#include "ckr/fem.hpp"

namespace ckr {

struct OutputSpec {
    int subdomain = 0;  // 0-based
    Segment segment;
};

struct FlowSection {
    std::vector<std::size_t> stages;  // R per subdomain (single value broadcasts)
    std::size_t couplings = 4;        // L
    std::size_t width = 32;
    double gamma = 0.6;
    std::size_t batch = 1000;
    std::size_t epochs = 200;
    double lr = 1e-3;
};

struct SurrogateSection {
    std::size_t width = 64;
    std::size_t blocks = 5;
    std::size_t batch = 256;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    double lr = 1e-3;
    double mse_ceiling = 1e-3;  // standardized validation MSE warning level
};

struct BenchSection {
    std::size_t dim = 16;
    std::vector<std::size_t> cond_dims{8, 12, 14};
    std::size_t n_train = 200000;
    std::size_t n_valid = 1000000;
    std::size_t epochs = 10;
    std::size_t batch = 512;
    double lr = 1e-3;
    std::uint64_t cov_seed = 2024;  // seeds the random covariance factors
    std::size_t per_epoch_valid = 100000;
};

struct PipelineConfig {
    Decomposition dec;                 // problem + subdomain + interface + dd sections
    double dd_tol = 1e-6;
    std::size_t dd_max_steps = 500;
    std::size_t pod_snapshots = 100;   // number of xi samples driving the snapshot runs
    // snapshots = every DD iterate of those runs ("iterates", paper process)
    // or only the converged interface data ("converged")
    bool snapshots_from_iterates = true;

    std::size_t n_off = 1000;
    std::size_t n_on = 1000;
    std::size_t n_ref = 1000;
    std::uint64_t seed = 1;

    FlowSection flow;
    SurrogateSection surrogate;
    BenchSection bench;

    std::vector<OutputSpec> outputs;
    std::vector<double> report_thresholds;  // optional exceedance thresholds

    std::string raw_text;  // verbatim config file, for hashing

    // stage count for subdomain i (broadcast rule applied)
    std::size_t flow_stages(int i) const;
};

// Parses the sectioned key-value format; every violation is reported with
// the offending line number.
PipelineConfig parse_config_text(const std::string& text, const std::string& origin);
PipelineConfig load_config(const std::string& path);

std::uint64_t config_hash(const PipelineConfig& cfg);

}  // namespace ckr

#endif
