#pragma once

#include <cstdint>
#include <string>

namespace icicle {

enum class GraphMode {
    kTwoScale,  // 1-NN + 10-NN style two-stream graphs
    kSingle,    // both streams share one graph at k_single (single-scale ablation)
};

/// Shared hyper-parameters for both training phases.
struct Config {
    double tau_i = 0.5;
    double tau_c = 1.0;
    std::size_t batch_size = 128;
    double learning_rate = 1e-4;
    int epochs = 30;
    double fuse_sigma = 0.4;  // own-stream coefficient in layer fusion
    double fuse_gamma = 0.2;  // cross-stream coefficient
    double alpha = 0.1;       // cluster KL weight
    double beta = 0.1;        // stream-a KL weight
    double eta = 0.1;         // stream-b KL weight
    double t_heat = 1.0;
    double t_dof = 1.0;
    std::size_t k_a = 1;
    std::size_t k_b = 10;
    int iterations = 200;  // phase-2 iteration count
    std::uint64_t seed = 42;
    std::size_t feature_dim = 64;  // backbone output width d
    std::size_t proj_dim = 32;     // ISM projection width
    bool use_cis = true;           // phase-1 loss toggles for ablation runs
    bool use_ccs = true;
    GraphMode graph_mode = GraphMode::kTwoScale;
    std::size_t k_single = 1;
};

void validate(const Config& cfg);

/// Config plus file locations and mode flags for the pipeline driver.
struct RunConfig {
    Config config;
    std::string data_path;
    std::string out_dir;
};

void validate(const RunConfig& cfg);

/// INI-style key=value parser with one [section] per module; unknown
/// sections or keys are errors.
RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config_file(const std::string& path);

}  // namespace icicle
