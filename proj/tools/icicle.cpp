// icicle: synthetic-data deep clustering pipeline driver.
//
// Subcommands: data gen, train-phase1, graph, train-phase2, eval, run.
// Exit codes: 0 success, 2 config error, 3 data-format error,
// 4 training divergence, 1 anything else.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "icicle/config.hpp"
#include "icicle/contrastive.hpp"
#include "icicle/data.hpp"
#include "icicle/errors.hpp"
#include "icicle/graph.hpp"
#include "icicle/metrics.hpp"
#include "icicle/mgcn.hpp"
#include "icicle/pipeline.hpp"

namespace {

using namespace icicle;

struct DataGenArgs {
    int k = 3;
    int per_cluster = 100;
    int size = 16;
    double sigma = 0.05;
    std::uint64_t seed = 42;
    std::string out;
};

int cmd_data_gen(const DataGenArgs& args) {
    SyntheticSpec spec;
    spec.num_clusters = args.k;
    spec.images_per_cluster = args.per_cluster;
    spec.image_size = args.size;
    spec.noise_sigma = args.sigma;
    spec.seed = args.seed;
    ImageDataset ds = generate_dataset(spec);
    write_dataset(ds, args.out);
    std::printf("wrote %zu images (%dx%dx%d, K=%d) to %s\n", ds.size(), 3, args.size, args.size,
                args.k, args.out.c_str());
    return 0;
}

int cmd_train_phase1(const std::string& data_path, const std::string& config_path,
                     const std::string& out_path) {
    Config cfg;
    if (!config_path.empty()) cfg = parse_run_config_file(config_path).config;
    validate(cfg);
    ImageDataset ds = read_dataset(data_path);
    Phase1Trainer trainer(cfg, ds.height(), ds.width(), ds.num_clusters);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        LossReport r = trainer.run_epoch(ds, epoch);
        std::printf("epoch %d cis=%.6f ccs=%.6f re=%.6f total=%.6f\n", r.epoch, r.cis_loss,
                    r.ccs_loss, r.re_loss, r.total);
    }
    Tensor z_b = backbone_features(trainer.backbone(), ds.images);
    write_checkpoint(out_path, phase1_checkpoint_params(trainer, z_b));
    std::printf("wrote checkpoint %s\n", out_path.c_str());
    return 0;
}

int cmd_graph(const std::string& ckpt_path, std::size_t k, double t_heat,
              const std::string& out_path) {
    std::vector<Parameter> params = read_checkpoint(ckpt_path);
    Tensor features = find_checkpoint_tensor(params, "features.Zb");
    KnnGraph graph = build_knn_graph(features, k, t_heat);
    std::ofstream os(out_path);
    if (!os) throw FormatError("cannot open '" + out_path + "' for writing", 0);
    write_edge_list(graph, os);
    std::printf("wrote %zu-NN edge list to %s\n", k, out_path.c_str());
    return 0;
}

int cmd_train_phase2(const std::string& data_path, const std::string& ckpt_path,
                     const std::string& config_path, const std::string& out_path,
                     const std::string& labels_path) {
    Config cfg;
    if (!config_path.empty()) cfg = parse_run_config_file(config_path).config;
    validate(cfg);
    ImageDataset ds = read_dataset(data_path);
    std::vector<Parameter> stored = read_checkpoint(ckpt_path);
    BackboneParams backbone = backbone_from_checkpoint(stored, ds.height(), ds.width());
    AutoEncoderParams ae = autoencoder_from_checkpoint(stored);

    Tensor z_b = backbone_features(backbone, ds.images);
    const bool single_scale = cfg.graph_mode == GraphMode::kSingle;
    const std::size_t k_a = single_scale ? cfg.k_single : cfg.k_a;
    const std::size_t k_b = single_scale ? cfg.k_single : cfg.k_b;
    NormalizedAdjacency adj_a = normalize_adjacency(build_knn_graph(z_b, k_a, cfg.t_heat));
    NormalizedAdjacency adj_b =
        single_scale ? adj_a : normalize_adjacency(build_knn_graph(z_b, k_b, cfg.t_heat));
    Tensor bottleneck = encoder_forward(ae, z_b).back().detach();
    ClusterCenters centers = kmeans_init_centers(bottleneck, ds.num_clusters,
                                                 derive_seed(cfg.seed, 0x63656e7472ULL));
    TridentState state(ae, adj_a, adj_b, centers, cfg, single_scale);
    for (int it = 0; it < cfg.iterations; ++it) {
        Phase2Report r = train_phase2_iteration(state, z_b, it);
        if (it % 20 == 0 || it + 1 == cfg.iterations) {
            std::printf("iter %d re=%.6f cluster=%.6f kl_a=%.6f kl_b=%.6f total=%.6f\n",
                        r.iteration, r.re_loss, r.cluster_loss, r.kl_a, r.kl_b, r.total);
        }
    }
    TridentOutputs final_out = state.forward(z_b);
    std::vector<int> labels = assign_clusters(final_out.gs_a, final_out.gs_b);

    std::vector<Parameter> out_params = state.params().all();
    out_params.push_back({"centers.mu", state.centers().mu.detach()});
    write_checkpoint(out_path, out_params);
    if (!labels_path.empty()) write_labels(labels, labels_path);
    std::printf("wrote checkpoint %s\n", out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& truth_path, const std::string& pred_path,
             const std::string& out_path) {
    Partition truth = Partition::from_labels(read_labels(truth_path));
    Partition pred = Partition::from_labels(read_labels(pred_path));
    const double acc = clustering_accuracy(truth, pred);
    const double nmi_value = nmi(truth, pred);
    const double ari_value = ari(truth, pred);
    char buffer[128];
    std::snprintf(buffer, sizeof(buffer), "acc,nmi,ari\n%.17g,%.17g,%.17g\n", acc, nmi_value,
                  ari_value);
    std::fputs(buffer, stdout);
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        os << buffer;
    }
    return 0;
}

int cmd_run(const std::string& config_path, bool dry_run) {
    RunConfig cfg = parse_run_config_file(config_path);
    PipelineResult result = run_pipeline(cfg, dry_run);
    if (dry_run) {
        std::printf("dry run: config and data header are valid\n");
    } else {
        std::printf("acc=%.6f nmi=%.6f ari=%.6f (artifacts in %s)\n", result.acc, result.nmi,
                    result.ari, cfg.out_dir.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-phase contrastive + graph-convolutional deep clustering"};
    app.require_subcommand(1);

    // data gen
    auto* data = app.add_subcommand("data", "dataset utilities");
    data->require_subcommand(1);
    DataGenArgs gen_args;
    auto* gen = data->add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--k", gen_args.k, "number of clusters");
    gen->add_option("--per-cluster", gen_args.per_cluster, "images per cluster");
    gen->add_option("--size", gen_args.size, "image side length");
    gen->add_option("--sigma", gen_args.sigma, "pixel noise sigma");
    gen->add_option("--seed", gen_args.seed, "generation seed");
    gen->add_option("--out", gen_args.out, "output path")->required();

    // train-phase1
    std::string p1_data, p1_config, p1_out;
    auto* p1 = app.add_subcommand("train-phase1", "contrastive pretraining");
    p1->add_option("--data", p1_data, "dataset path")->required();
    p1->add_option("--config", p1_config, "config file");
    p1->add_option("--out", p1_out, "checkpoint output path")->required();

    // graph
    std::string g_ckpt, g_out;
    std::size_t g_k = 10;
    double g_t = 1.0;
    auto* g = app.add_subcommand("graph", "dump a k-NN edge list from checkpoint features");
    g->add_option("--features", g_ckpt, "phase-1 checkpoint with features.Zb")->required();
    g->add_option("--k", g_k, "neighbors per node")->required();
    g->add_option("--t-heat", g_t, "heat kernel time parameter");
    g->add_option("--out", g_out, "edge list output path")->required();

    // train-phase2
    std::string p2_data, p2_ckpt, p2_config, p2_out, p2_labels;
    auto* p2 = app.add_subcommand("train-phase2", "multi-scale GCN refinement");
    p2->add_option("--data", p2_data, "dataset path")->required();
    p2->add_option("--ckpt", p2_ckpt, "phase-1 checkpoint")->required();
    p2->add_option("--config", p2_config, "config file");
    p2->add_option("--out", p2_out, "checkpoint output path")->required();
    p2->add_option("--labels-out", p2_labels, "final label file (one integer per line)");

    // eval
    std::string e_truth, e_pred, e_out;
    auto* ev = app.add_subcommand("eval", "score predicted labels against ground truth");
    ev->add_option("--truth", e_truth, "ground-truth label file")->required();
    ev->add_option("--pred", e_pred, "predicted label file")->required();
    ev->add_option("--out", e_out, "also write the CSV here");

    // run
    std::string r_config;
    bool r_dry = false;
    auto* run = app.add_subcommand("run", "full two-phase pipeline from a config file");
    run->add_option("--config", r_config, "config file")->required();
    run->add_flag("--dry-run", r_dry, "validate config and data header, write nothing");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_data_gen(gen_args);
        if (p1->parsed()) return cmd_train_phase1(p1_data, p1_config, p1_out);
        if (g->parsed()) return cmd_graph(g_ckpt, g_k, g_t, g_out);
        if (p2->parsed()) return cmd_train_phase2(p2_data, p2_ckpt, p2_config, p2_out, p2_labels);
        if (ev->parsed()) return cmd_eval(e_truth, e_pred, e_out);
        if (run->parsed()) return cmd_run(r_config, r_dry);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "data format error: %s\n", e.what());
        return 3;
    } catch (const TrainingDivergence& e) {
        std::fprintf(stderr, "training divergence: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
