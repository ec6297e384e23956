#include "icicle/contrastive.hpp"

#include <cmath>

#include "icicle/errors.hpp"

namespace icicle {

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw DimensionError("cosine_similarity: vectors of length " + std::to_string(u.size()) +
                             " vs " + std::to_string(v.size()));
    }
    double uu = 0.0, vv = 0.0, uv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uu += u[i] * u[i];
        vv += v[i] * v[i];
        uv += u[i] * v[i];
    }
    const double nu = std::sqrt(uu), nv = std::sqrt(vv);
    if (nu < 1e-12 || nv < 1e-12) {
        throw DegenerateInputError("cosine_similarity: vector norm below 1e-12");
    }
    return uv / (nu * nv);
}

namespace {

// Mean contrastive loss over the 2R anchors of two views, with the literal
// denominator that keeps the anchor's own same-view term.
Tensor two_view_contrast(const Tensor& rows_a, const Tensor& rows_b, double tau) {
    const std::size_t r = rows_a.rows();
    Tensor a_hat = l2_normalize_rows(rows_a);
    Tensor b_hat = l2_normalize_rows(rows_b);
    Tensor s_ab = matmul(a_hat, transpose(b_hat));
    Tensor s_aa = matmul(a_hat, transpose(a_hat));
    Tensor s_bb = matmul(b_hat, transpose(b_hat));
    Tensor s_ba = transpose(s_ab);

    Tensor eye = Tensor::identity(r);
    Tensor ones = Tensor::ones({r, 1});
    const double inv_tau = 1.0 / tau;

    Tensor pos_trace = sum(mul(s_ab, eye));  // sum_i s(a_i, b_i)
    Tensor den_a = add(matmul(exp(mul_scalar(s_aa, inv_tau)), ones),
                       matmul(exp(mul_scalar(s_ab, inv_tau)), ones));
    Tensor den_b = add(matmul(exp(mul_scalar(s_bb, inv_tau)), ones),
                       matmul(exp(mul_scalar(s_ba, inv_tau)), ones));
    Tensor total = sub(add(sum(log(den_a)), sum(log(den_b))),
                       mul_scalar(pos_trace, 2.0 * inv_tau));
    return mul_scalar(total, 1.0 / (2.0 * static_cast<double>(r)));
}

void require_row_stochastic(const Tensor& w, const char* what) {
    const std::size_t n = w.rows(), k = w.cols();
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += w.at(i, j);
        if (std::abs(s - 1.0) > 1e-9) {
            throw ContractError(std::string(what) + ": row " + std::to_string(i) +
                                " sums to " + std::to_string(s) + ", expected 1");
        }
    }
}

}  // namespace

Tensor instance_contrastive_loss(const Tensor& m_a, const Tensor& m_b, double tau_i) {
    if (tau_i <= 0.0) throw ConfigError("instance_contrastive_loss: tau_i must be positive");
    if (m_a.shape() != m_b.shape()) {
        throw DimensionError("instance_contrastive_loss: view shapes differ, " +
                             shape_str(m_a.shape()) + " vs " + shape_str(m_b.shape()));
    }
    if (m_a.rows() < 1) throw ContractError("instance_contrastive_loss: empty batch");
    return two_view_contrast(m_a, m_b, tau_i);
}

Tensor cluster_contrastive_loss(const Tensor& w_a, const Tensor& w_b, double tau_c) {
    if (tau_c <= 0.0) throw ConfigError("cluster_contrastive_loss: tau_c must be positive");
    if (w_a.shape() != w_b.shape()) {
        throw DimensionError("cluster_contrastive_loss: view shapes differ, " +
                             shape_str(w_a.shape()) + " vs " + shape_str(w_b.shape()));
    }
    require_row_stochastic(w_a, "cluster_contrastive_loss W_a");
    require_row_stochastic(w_b, "cluster_contrastive_loss W_b");
    const std::size_t n = w_a.rows(), k = w_a.cols();
    for (const Tensor* w : {&w_a, &w_b}) {
        for (std::size_t j = 0; j < k; ++j) {
            double col = 0.0;
            for (std::size_t i = 0; i < n; ++i) col += w->at(i, j) * w->at(i, j);
            if (std::sqrt(col) < 1e-12) {
                throw DegenerateInputError("cluster_contrastive_loss: cluster column " +
                                           std::to_string(j) + " is zero");
            }
        }
    }

    Tensor contrast = two_view_contrast(transpose(w_a), transpose(w_b), tau_c);

    Tensor ones_row = Tensor::ones({1, n});
    const double inv_n = 1.0 / static_cast<double>(n);
    Tensor mean_a = mul_scalar(matmul(ones_row, w_a), inv_n);  // 1 x K cluster masses
    Tensor mean_b = mul_scalar(matmul(ones_row, w_b), inv_n);
    Tensor entropy_a = mul_scalar(sum(mul(mean_a, log(mean_a))), -1.0);
    Tensor entropy_b = mul_scalar(sum(mul(mean_b, log(mean_b))), -1.0);
    return sub(sub(contrast, entropy_a), entropy_b);
}

Tensor instance_reconstruction_loss(const Tensor& z_a, const Tensor& z_b, const Tensor& zhat_a,
                                    const Tensor& zhat_b) {
    if (z_a.shape() != zhat_a.shape() || z_b.shape() != zhat_b.shape() ||
        z_a.shape() != z_b.shape()) {
        throw DimensionError("instance_reconstruction_loss: shape mismatch");
    }
    const double inv = 1.0 / (2.0 * static_cast<double>(z_a.rows()));
    Tensor ra = sub(z_a, zhat_a);
    Tensor rb = sub(z_b, zhat_b);
    return mul_scalar(add(sum(mul(ra, ra)), sum(mul(rb, rb))), inv);
}

Tensor l1_total(const Tensor& cis, const Tensor& ccs, const Tensor& re) {
    return add(add(cis, ccs), re);
}

Phase1Trainer::Phase1Trainer(const Config& cfg, std::size_t image_height,
                             std::size_t image_width, int num_clusters)
    : cfg_([&] {
          validate(cfg);
          if (num_clusters < 2) throw ConfigError("phase 1: need at least 2 clusters");
          return cfg;
      }()),
      backbone_([&] {
          Rng rng(derive_seed(cfg.seed, 0x696e6974ULL));
          return make_backbone(image_height, image_width, cfg.feature_dim, rng);
      }()),
      ism_([&] {
          Rng rng(derive_seed(cfg.seed, 0x69736dULL));
          return make_ism_head(cfg.feature_dim, cfg.proj_dim, rng);
      }()),
      ae_([&] {
          Rng rng(derive_seed(cfg.seed, 0x6165ULL));
          return make_autoencoder(cfg.feature_dim, static_cast<std::size_t>(num_clusters), rng);
      }()),
      registry_(),
      opt_([&] {
          register_params(registry_, "backbone", backbone_);
          register_params(registry_, "ism", ism_);
          register_params(registry_, "ae", ae_);
          return AdamOptimizer(registry_.tensors(), cfg.learning_rate);
      }()) {}

LossReport Phase1Trainer::run_epoch(const ImageDataset& dataset, int epoch) {
    const std::size_t n = dataset.size();
    if (n == 0) throw ContractError("phase 1: empty dataset");

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(cfg_.seed, 0x73687566ULL + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    LossReport report;
    report.epoch = epoch;
    double samples = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg_.batch_size, ++batch_index) {
        const std::size_t count = std::min(cfg_.batch_size, n - start);
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(start + count));
        Tensor batch = select_images(dataset.images, idx);
        const std::uint64_t aug_seed =
            derive_seed(cfg_.seed, 0x617567ULL ^ (static_cast<std::uint64_t>(epoch) << 20) ^
                                       batch_index);
        AugmentedPair pair = augment(batch, aug_seed);

        Tensor z_a = backbone_forward(backbone_, pair.view_a);
        Tensor z_b = backbone_forward(backbone_, pair.view_b);

        Tensor cis = Tensor::scalar(0.0);
        if (cfg_.use_cis) {
            Tensor proj_a = ism_forward(ism_, z_a);
            Tensor proj_b = ism_forward(ism_, z_b);
            cis = instance_contrastive_loss(proj_a, proj_b, cfg_.tau_i);
        }

        Tensor bottleneck_a = encoder_forward(ae_, z_a).back();
        Tensor bottleneck_b = encoder_forward(ae_, z_b).back();
        Tensor ccs = Tensor::scalar(0.0);
        if (cfg_.use_ccs) {
            ccs = cluster_contrastive_loss(row_softmax(bottleneck_a), row_softmax(bottleneck_b),
                                           cfg_.tau_c);
        }

        Tensor re = instance_reconstruction_loss(z_a, z_b, decoder_forward(ae_, bottleneck_a),
                                                 decoder_forward(ae_, bottleneck_b));
        Tensor total = l1_total(cis, ccs, re);

        backward(total);
        opt_.step();
        registry_.zero_grads();

        const double weight = static_cast<double>(count);
        report.cis_loss += weight * cis.item();
        report.ccs_loss += weight * ccs.item();
        report.re_loss += weight * re.item();
        samples += weight;
    }
    report.cis_loss /= samples;
    report.ccs_loss /= samples;
    report.re_loss /= samples;
    report.total = report.cis_loss + report.ccs_loss + report.re_loss;
    return report;
}

Tensor backbone_features(const BackboneParams& params, const Tensor& images) {
    return backbone_forward(params, augment_identity(images).view_a).detach();
}

}  // namespace icicle
