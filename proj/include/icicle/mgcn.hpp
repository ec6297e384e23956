#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "icicle/config.hpp"
#include "icicle/graph.hpp"
#include "icicle/nn.hpp"
#include "icicle/tensor.hpp"

namespace icicle {

/// One GCN stream: bias-free weight matrices mirroring the encoder widths.
struct GcnStreamParams {
    std::vector<Tensor> weights;  // d->500, 500->500, 500->2000, 2000->K
};

/// Widths are read off the encoder so fusion stays dimensionally valid.
GcnStreamParams make_gcn_stream(const AutoEncoderParams& ae, Rng& rng);

/// Phi(adj . x . w); Phi is ReLU when `activate`, identity otherwise.
Tensor gcn_layer(const Tensor& adj, const Tensor& x, const Tensor& w, bool activate);

/// Layer-wise fusion: own stream scaled by sigma, the other stream by gamma,
/// and the encoder representation takes the remaining mass.
std::pair<Tensor, Tensor> fuse_representations(const Tensor& g_a, const Tensor& g_b,
                                               const Tensor& h, double sigma, double gamma);

/// (1/N) ||z - z_hat||_F^2, the single-view reconstruction loss.
Tensor mgcn_reconstruction_loss(const Tensor& z, const Tensor& zhat);

/// One cluster center per row in the encoder's K-wide bottleneck space.
struct ClusterCenters {
    Tensor mu;  // K x K, constant
};

struct SoftAssignment {
    Tensor q;  // N x K row-stochastic, strictly positive
    double t_dof = 1.0;
};

SoftAssignment student_t_assignment(const Tensor& h, const ClusterCenters& centers, double t_dof);

struct TargetDistribution {
    Tensor p;                        // N x K row-stochastic constant
    std::vector<double> frequencies; // f_j = sum_i q_ij
};

/// Sharpened, frequency-normalized target computed from Q's values (detached).
TargetDistribution target_distribution(const Tensor& q);

/// Sum_ij p_ij ln(p_ij / r_ij) with 0 ln 0 = 0. R must be strictly positive
/// wherever P is positive; both must be row-stochastic.
Tensor kl_divergence(const Tensor& p, const Tensor& r);

/// re + alpha * cluster + beta * kl_a + eta * kl_b
Tensor l2_total(const Tensor& re, const Tensor& cluster, const Tensor& kl_a, const Tensor& kl_b,
                double alpha, double beta, double eta);

struct KMeansResult {
    Tensor centers;           // k x D
    std::vector<int> labels;  // per-point nearest center
    double wcss = 0.0;        // within-cluster sum of squares
};

/// Lloyd's algorithm with seeded farthest-point initialization.
KMeansResult kmeans(const Tensor& points, int k, std::uint64_t seed);
ClusterCenters kmeans_init_centers(const Tensor& h, int k, std::uint64_t seed);

struct TridentOutputs {
    std::vector<Tensor> encoder_layers;  // H^(1..L)
    Tensor reconstruction;               // decoder output
    Tensor gs_a;                         // stream-a softmax distribution
    Tensor gs_b;
};

/// Full trident pass: encoder/decoder plus both fused GCN streams. Layer 1 of
/// each stream consumes z_b directly; later layers consume the fusion of both
/// streams with the matching encoder layer.
TridentOutputs trident_forward(const AutoEncoderParams& ae, const GcnStreamParams& stream_a,
                               const GcnStreamParams& stream_b, const Tensor& adj_a,
                               const Tensor& adj_b, const Tensor& z_b, double sigma,
                               double gamma);

/// Autoencoder (shared with phase 1) plus two GCN streams and frozen graphs.
class TridentState {
public:
    TridentState(AutoEncoderParams ae, const NormalizedAdjacency& adj_a,
                 const NormalizedAdjacency& adj_b, ClusterCenters centers, const Config& cfg,
                 bool identical_stream_init = false);

    TridentOutputs forward(const Tensor& z_b) const;

    const ClusterCenters& centers() const { return centers_; }
    const AutoEncoderParams& autoencoder() const { return ae_; }
    const GcnStreamParams& stream_a() const { return stream_a_; }
    const GcnStreamParams& stream_b() const { return stream_b_; }
    const Config& config() const { return cfg_; }
    ModelParams& params() { return registry_; }
    AdamOptimizer& optimizer() { return opt_; }

private:
    AutoEncoderParams ae_;
    GcnStreamParams stream_a_;
    GcnStreamParams stream_b_;
    Tensor adj_a_;
    Tensor adj_b_;
    ClusterCenters centers_;
    Config cfg_;
    ModelParams registry_;
    AdamOptimizer opt_;
};

struct Phase2Report {
    double re_loss = 0.0;
    double cluster_loss = 0.0;
    double kl_a = 0.0;
    double kl_b = 0.0;
    double total = 0.0;
    double max_rowsum_deviation = 0.0;  // worst |row sum - 1| over Q, P, Gs_a, Gs_b
    int iteration = 0;
};

/// One full-batch forward, target refresh, and Adam step on the trident.
Phase2Report train_phase2_iteration(TridentState& state, const Tensor& z_b, int iteration);

/// argmax of the averaged stream distributions, ties to the lower index.
std::vector<int> assign_clusters(const Tensor& gs_a, const Tensor& gs_b);

}  // namespace icicle
