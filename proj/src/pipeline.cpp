#include "icicle/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "icicle/errors.hpp"
#include "icicle/graph.hpp"
#include "icicle/metrics.hpp"

namespace icicle {

namespace {

using nlohmann::json;

Tensor trainable_copy(const Tensor& stored) {
    return Tensor::from_data(stored.shape(), stored.data(), true);
}

DenseLayer dense_from(const std::vector<Parameter>& params, const std::string& prefix) {
    DenseLayer layer;
    layer.weight = trainable_copy(find_checkpoint_tensor(params, prefix + ".W"));
    layer.bias = trainable_copy(find_checkpoint_tensor(params, prefix + ".b"));
    return layer;
}

std::string metrics_csv(double acc, double nmi_value, double ari_value) {
    char buffer[128];
    std::snprintf(buffer, sizeof(buffer), "acc,nmi,ari\n%.17g,%.17g,%.17g\n", acc, nmi_value,
                  ari_value);
    return buffer;
}

}  // namespace

Tensor find_checkpoint_tensor(const std::vector<Parameter>& params, const std::string& name) {
    for (const auto& p : params) {
        if (p.name == name) return p.tensor;
    }
    throw FormatError("checkpoint is missing tensor '" + name + "'", 0);
}

std::vector<Parameter> phase1_checkpoint_params(const Phase1Trainer& trainer,
                                                const Tensor& features) {
    std::vector<Parameter> out = trainer.params().all();
    out.push_back({"features.Zb", features.detach()});
    return out;
}

BackboneParams backbone_from_checkpoint(const std::vector<Parameter>& params, std::size_t height,
                                        std::size_t width) {
    BackboneParams bb;
    bb.conv1 = trainable_copy(find_checkpoint_tensor(params, "backbone.conv1"));
    bb.conv2 = trainable_copy(find_checkpoint_tensor(params, "backbone.conv2"));
    bb.fc = dense_from(params, "backbone.fc");
    bb.in_height = height;
    bb.in_width = width;
    bb.out_dim = bb.fc.weight.shape()[1];
    return bb;
}

AutoEncoderParams autoencoder_from_checkpoint(const std::vector<Parameter>& params) {
    AutoEncoderParams ae;
    for (std::size_t l = 0;; ++l) {
        const std::string prefix = "ae.enc" + std::to_string(l);
        bool found = false;
        for (const auto& p : params) {
            if (p.name == prefix + ".W") found = true;
        }
        if (!found) break;
        ae.encoder.push_back(dense_from(params, prefix));
    }
    for (std::size_t l = 0;; ++l) {
        const std::string prefix = "ae.dec" + std::to_string(l);
        bool found = false;
        for (const auto& p : params) {
            if (p.name == prefix + ".W") found = true;
        }
        if (!found) break;
        ae.decoder.push_back(dense_from(params, prefix));
    }
    if (ae.encoder.empty() || ae.decoder.empty()) {
        throw FormatError("checkpoint holds no autoencoder layers", 0);
    }
    return ae;
}

void write_labels(const std::vector<int>& labels, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot open '" + path + "' for writing", 0);
    for (int label : labels) os << label << "\n";
}

std::vector<int> read_labels(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open '" + path + "' for reading", 0);
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            std::size_t pos = 0;
            const int v = std::stoi(line, &pos);
            if (pos != line.size() || v < 0) throw std::invalid_argument(line);
            labels.push_back(v);
        } catch (const std::exception&) {
            throw FormatError("label file line " + std::to_string(line_no) +
                                  ": expected a nonnegative integer, got '" + line + "'",
                              0);
        }
    }
    return labels;
}

PipelineResult run_pipeline(const RunConfig& run_cfg, bool dry_run) {
    validate(run_cfg);
    const Config& cfg = run_cfg.config;

    if (dry_run) {
        read_dataset_header(run_cfg.data_path);
        PipelineResult result;
        result.dry_run = true;
        return result;
    }

    const ImageDataset dataset = read_dataset(run_cfg.data_path);
    std::filesystem::create_directories(run_cfg.out_dir);
    const std::filesystem::path out(run_cfg.out_dir);

    std::ofstream log(out / "train_log.jsonl");
    if (!log) throw FormatError("cannot open training log for writing", 0);

    // phase 1: contrastive pretraining of backbone + heads + autoencoder
    Phase1Trainer trainer(cfg, dataset.height(), dataset.width(), dataset.num_clusters);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        LossReport r = trainer.run_epoch(dataset, epoch);
        log << json{{"phase", 1},
                    {"epoch", r.epoch},
                    {"cis", r.cis_loss},
                    {"ccs", r.ccs_loss},
                    {"re", r.re_loss},
                    {"total", r.total}}
                   .dump()
            << "\n";
    }

    // single identity-augmented pass defines the frozen phase-2 features
    Tensor z_b = backbone_features(trainer.backbone(), dataset.images);
    write_checkpoint((out / "phase1.ick").string(), phase1_checkpoint_params(trainer, z_b));

    const bool single_scale = cfg.graph_mode == GraphMode::kSingle;
    const std::size_t k_a = single_scale ? cfg.k_single : cfg.k_a;
    const std::size_t k_b = single_scale ? cfg.k_single : cfg.k_b;
    NormalizedAdjacency adj_a = normalize_adjacency(build_knn_graph(z_b, k_a, cfg.t_heat));
    NormalizedAdjacency adj_b =
        single_scale ? adj_a : normalize_adjacency(build_knn_graph(z_b, k_b, cfg.t_heat));

    Tensor bottleneck = encoder_forward(trainer.autoencoder(), z_b).back().detach();
    ClusterCenters centers = kmeans_init_centers(bottleneck, dataset.num_clusters,
                                                 derive_seed(cfg.seed, 0x63656e7472ULL));

    TridentState state(trainer.autoencoder(), adj_a, adj_b, centers, cfg,
                       /*identical_stream_init=*/single_scale);

    PipelineResult result;
    for (int it = 0; it < cfg.iterations; ++it) {
        Phase2Report r = train_phase2_iteration(state, z_b, it);
        if (it == 0) result.l2_first = r.total;
        result.l2_last = r.total;
        if (r.max_rowsum_deviation > 1e-9) ++result.rowsum_violations;
        log << json{{"phase", 2},
                    {"iteration", r.iteration},
                    {"re", r.re_loss},
                    {"cluster", r.cluster_loss},
                    {"kl_a", r.kl_a},
                    {"kl_b", r.kl_b},
                    {"total", r.total},
                    {"max_rowsum_dev", r.max_rowsum_deviation}}
                   .dump()
            << "\n";
    }

    TridentOutputs final_out = state.forward(z_b);
    result.labels = assign_clusters(final_out.gs_a, final_out.gs_b);

    std::vector<Parameter> phase2_params = state.params().all();
    phase2_params.push_back({"centers.mu", state.centers().mu.detach()});
    write_checkpoint((out / "phase2.ick").string(), phase2_params);
    write_labels(result.labels, (out / "labels.txt").string());

    Partition truth{dataset.labels, dataset.num_clusters};
    Partition pred = Partition::from_labels(result.labels);
    pred.num_clusters = std::max(pred.num_clusters, dataset.num_clusters);
    result.acc = clustering_accuracy(truth, pred);
    result.nmi = nmi(truth, pred);
    result.ari = ari(truth, pred);

    std::ofstream metrics(out / "metrics.csv");
    metrics << metrics_csv(result.acc, result.nmi, result.ari);
    std::ofstream confusion(out / "confusion.csv");
    write_confusion_csv(confusion_matrix(truth, pred), confusion);
    return result;
}

}  // namespace icicle
