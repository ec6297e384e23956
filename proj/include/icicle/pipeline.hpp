#pragma once

#include <string>
#include <vector>

#include "icicle/config.hpp"
#include "icicle/contrastive.hpp"
#include "icicle/data.hpp"
#include "icicle/mgcn.hpp"

namespace icicle {

struct PipelineResult {
    double acc = 0.0;
    double nmi = 0.0;
    double ari = 0.0;
    std::vector<int> labels;
    double l2_first = 0.0;   // phase-2 loss at the first iteration
    double l2_last = 0.0;    // and at the last
    int rowsum_violations = 0;  // rows of Q/P/Gs off 1 by more than 1e-9
    bool dry_run = false;
};

/// Full two-phase run: train phase 1, build graphs, k-means init, phase 2,
/// final assignment. Writes phase1.ick, phase2.ick, labels.txt, metrics.csv,
/// confusion.csv, and train_log.jsonl into out_dir. With dry_run, only the
/// config and the data header are validated and nothing is written.
PipelineResult run_pipeline(const RunConfig& cfg, bool dry_run = false);

/// Shared pieces for the stepwise CLI commands.
std::vector<Parameter> phase1_checkpoint_params(const Phase1Trainer& trainer,
                                                const Tensor& features);
BackboneParams backbone_from_checkpoint(const std::vector<Parameter>& params, std::size_t height,
                                        std::size_t width);
AutoEncoderParams autoencoder_from_checkpoint(const std::vector<Parameter>& params);
Tensor find_checkpoint_tensor(const std::vector<Parameter>& params, const std::string& name);

void write_labels(const std::vector<int>& labels, const std::string& path);
std::vector<int> read_labels(const std::string& path);

}  // namespace icicle
