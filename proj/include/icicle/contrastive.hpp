#pragma once

#include <span>
#include <vector>

#include "icicle/config.hpp"
#include "icicle/data.hpp"
#include "icicle/nn.hpp"
#include "icicle/tensor.hpp"

namespace icicle {

/// (u . v) / (||u|| ||v||); both norms must be at least 1e-12.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Two-view instance contrast over projected rows. The denominator for each
/// anchor sums the exponentiated similarities to every row of both views,
/// including the anchor's own same-view term; the result is the mean over
/// all 2N anchors.
Tensor instance_contrastive_loss(const Tensor& m_a, const Tensor& m_b, double tau_i);

/// Column-wise cluster contrast of two row-stochastic assignment matrices
/// minus the entropy of each view's cluster-mass distribution.
Tensor cluster_contrastive_loss(const Tensor& w_a, const Tensor& w_b, double tau_c);

/// (1/2N) (||Za - Za_hat||_F^2 + ||Zb - Zb_hat||_F^2)
Tensor instance_reconstruction_loss(const Tensor& z_a, const Tensor& z_b, const Tensor& zhat_a,
                                    const Tensor& zhat_b);

/// Unweighted sum of the three phase-1 losses.
Tensor l1_total(const Tensor& cis, const Tensor& ccs, const Tensor& re);

/// Per-epoch mean losses. total always equals cis + ccs + re.
struct LossReport {
    double cis_loss = 0.0;
    double ccs_loss = 0.0;
    double re_loss = 0.0;
    double total = 0.0;
    int epoch = 0;
};

/// Backbone + ISM head + autoencoder trained jointly on the combined loss.
class Phase1Trainer {
public:
    Phase1Trainer(const Config& cfg, std::size_t image_height, std::size_t image_width,
                  int num_clusters);

    LossReport run_epoch(const ImageDataset& dataset, int epoch);

    const BackboneParams& backbone() const { return backbone_; }
    const IsmHeadParams& ism_head() const { return ism_; }
    const AutoEncoderParams& autoencoder() const { return ae_; }
    ModelParams& params() { return registry_; }
    const ModelParams& params() const { return registry_; }

private:
    Config cfg_;
    BackboneParams backbone_;
    IsmHeadParams ism_;
    AutoEncoderParams ae_;
    ModelParams registry_;
    AdamOptimizer opt_;
};

/// Detached backbone features of un-augmented images (phase-2 input Z^b).
Tensor backbone_features(const BackboneParams& params, const Tensor& images);

}  // namespace icicle
