#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "ckr/kernels.hpp"
#include "ckr/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Domain-decomposed uncertainty quantification with conditional "
                 "normalizing-flow reweighting"};

    std::string config_path;
    std::string stage;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    int workers = 1;

    app.add_option("--config", config_path, "pipeline configuration file")->required();
    app.add_option("--stage", stage,
                   "stage to run: prep|offline|surrogate|online|report|flow-bench")
        ->required();
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--workers", workers, "worker threads for sample-parallel maps")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "artifact directory");

    CLI11_PARSE(app, argc, argv);

    try {
        ckr::PipelineConfig cfg = ckr::load_config(config_path);
        ckr::Pipeline pipeline(std::move(cfg), out_dir, workers, seed);
        std::printf("stage %s (kernels: %s, workers: %d, seed: %llu)\n", stage.c_str(),
                    ckr::kern::active_name().c_str(), workers,
                    static_cast<unsigned long long>(pipeline.base_seed()));
        pipeline.run_stage(stage);
        std::printf("stage %s done; artifacts in %s\n", stage.c_str(), out_dir.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
