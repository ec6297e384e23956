#include "icicle/mgcn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icicle/errors.hpp"

namespace icicle {

GcnStreamParams make_gcn_stream(const AutoEncoderParams& ae, Rng& rng) {
    GcnStreamParams p;
    for (const DenseLayer& layer : ae.encoder) {
        const std::size_t in = layer.weight.shape()[0];
        const std::size_t out = layer.weight.shape()[1];
        p.weights.push_back(make_weight({in, out}, in, rng, InitKind::kHe));
    }
    return p;
}

Tensor gcn_layer(const Tensor& adj, const Tensor& x, const Tensor& w, bool activate) {
    // (adj x) w and adj (x w) agree; pick the cheaper association for NxN adj
    const bool narrowing = w.shape()[1] < x.shape()[1];
    Tensor out = narrowing ? matmul(adj, matmul(x, w)) : matmul(matmul(adj, x), w);
    return activate ? relu(out) : out;
}

std::pair<Tensor, Tensor> fuse_representations(const Tensor& g_a, const Tensor& g_b,
                                               const Tensor& h, double sigma, double gamma) {
    if (sigma < 0.0 || gamma < 0.0 || sigma + gamma > 1.0) {
        throw ConfigError("fuse_representations: need sigma, gamma >= 0 and sigma + gamma <= 1");
    }
    if (g_a.shape() != g_b.shape() || g_a.shape() != h.shape()) {
        throw DimensionError("fuse_representations: mismatched shapes " + shape_str(g_a.shape()) +
                             ", " + shape_str(g_b.shape()) + ", " + shape_str(h.shape()));
    }
    const double rest = 1.0 - sigma - gamma;
    Tensor fused_a = add(add(mul_scalar(g_a, sigma), mul_scalar(g_b, gamma)), mul_scalar(h, rest));
    Tensor fused_b = add(add(mul_scalar(g_b, sigma), mul_scalar(g_a, gamma)), mul_scalar(h, rest));
    return {fused_a, fused_b};
}

Tensor mgcn_reconstruction_loss(const Tensor& z, const Tensor& zhat) {
    if (z.shape() != zhat.shape()) {
        throw DimensionError("mgcn_reconstruction_loss: shape mismatch " + shape_str(z.shape()) +
                             " vs " + shape_str(zhat.shape()));
    }
    Tensor residual = sub(z, zhat);
    return mul_scalar(sum(mul(residual, residual)), 1.0 / static_cast<double>(z.rows()));
}

SoftAssignment student_t_assignment(const Tensor& h, const ClusterCenters& centers,
                                    double t_dof) {
    if (t_dof <= 0.0) throw ConfigError("student_t_assignment: t must be positive");
    Tensor d2 = pairwise_sqdist(h, centers.mu);
    Tensor kernel = pow_scalar(add_scalar(mul_scalar(d2, 1.0 / t_dof), 1.0), -(t_dof + 1.0) / 2.0);
    return {row_normalize(kernel), t_dof};
}

TargetDistribution target_distribution(const Tensor& q) {
    const std::size_t n = q.rows(), k = q.cols();
    std::vector<double> f(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) f[j] += q.at(i, j);
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (!(f[j] > 0.0)) {
            throw DegenerateInputError("target_distribution: cluster " + std::to_string(j) +
                                       " has zero soft frequency");
        }
    }
    std::vector<double> p(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p[i * k + j] = q.at(i, j) * q.at(i, j) / f[j];
            s += p[i * k + j];
        }
        for (std::size_t j = 0; j < k; ++j) p[i * k + j] /= s;
    }
    return {Tensor::from_data({n, k}, std::move(p)), std::move(f)};
}

namespace {

void require_row_stochastic(const Tensor& m, const char* what) {
    const std::size_t r = m.rows(), c = m.cols();
    for (std::size_t i = 0; i < r; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < c; ++j) s += m.at(i, j);
        if (std::abs(s - 1.0) > 1e-9) {
            throw ContractError(std::string(what) + ": row " + std::to_string(i) + " sums to " +
                                std::to_string(s));
        }
    }
}

}  // namespace

Tensor kl_divergence(const Tensor& p, const Tensor& r) {
    if (p.shape() != r.shape()) {
        throw DimensionError("kl_divergence: shape mismatch " + shape_str(p.shape()) + " vs " +
                             shape_str(r.shape()));
    }
    require_row_stochastic(p, "kl_divergence P");
    require_row_stochastic(r, "kl_divergence R");
    const auto& pd = p.data();
    const auto& rd = r.data();
    double total = 0.0;
    for (std::size_t i = 0; i < pd.size(); ++i) {
        if (pd[i] > 0.0) {
            if (!(rd[i] > 0.0)) {
                throw DomainError("kl_divergence: R is zero where P has mass (entry " +
                                  std::to_string(i) + ")");
            }
            total += pd[i] * std::log(pd[i] / rd[i]);
        }
    }
    auto pn = p.node();
    auto rn = r.node();
    return make_custom_op({1, 1}, {total}, "kl_divergence", {p, r}, [pn, rn](TensorNode& self) {
        const double g = self.grad[0];
        for (std::size_t i = 0; i < pn->data.size(); ++i) {
            if (pn->data[i] <= 0.0) continue;
            if (pn->requires_grad) {
                pn->grad[i] += g * (std::log(pn->data[i] / rn->data[i]) + 1.0);
            }
            if (rn->requires_grad) {
                rn->grad[i] -= g * pn->data[i] / rn->data[i];
            }
        }
    });
}

Tensor l2_total(const Tensor& re, const Tensor& cluster, const Tensor& kl_a, const Tensor& kl_b,
                double alpha, double beta, double eta) {
    if (alpha < 0.0 || beta < 0.0 || eta < 0.0) {
        throw ConfigError("l2_total: weights must be >= 0");
    }
    return add(add(re, mul_scalar(cluster, alpha)),
               add(mul_scalar(kl_a, beta), mul_scalar(kl_b, eta)));
}

// ---- k-means ----

namespace {

double sqdist_rows(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t t = 0; t < d; ++t) {
        const double diff = a[t] - b[t];
        s += diff * diff;
    }
    return s;
}

}  // namespace

KMeansResult kmeans(const Tensor& points, int k, std::uint64_t seed) {
    const std::size_t n = points.rows(), d = points.cols();
    const std::size_t kk = static_cast<std::size_t>(k);
    if (k < 1 || n < kk) {
        throw ContractError("kmeans: need at least k points, got N=" + std::to_string(n) +
                            ", k=" + std::to_string(k));
    }
    const double* x = points.data().data();

    // farthest-point seeding; the first pick is the only random choice
    Rng rng(derive_seed(seed, 0x6b6d65616e73ULL));
    std::vector<double> centers(kk * d);
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.index(n);
    std::copy(x + first * d, x + (first + 1) * d, centers.begin());
    for (std::size_t c = 1; c < kk; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], sqdist_rows(x + i * d, &centers[(c - 1) * d], d));
        }
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (nearest[i] > nearest[far]) far = i;
        }
        std::copy(x + far * d, x + (far + 1) * d, centers.begin() + static_cast<std::ptrdiff_t>(c * d));
    }

    std::vector<int> labels(n, 0);
    std::vector<double> fresh(kk * d);
    std::vector<std::size_t> count(kk);
    for (int iter = 0; iter < 100; ++iter) {
        // assignment, ties to the lower center index
        for (std::size_t i = 0; i < n; ++i) {
            double best = sqdist_rows(x + i * d, &centers[0], d);
            int best_c = 0;
            for (std::size_t c = 1; c < kk; ++c) {
                const double dist = sqdist_rows(x + i * d, &centers[c * d], d);
                if (dist < best) {
                    best = dist;
                    best_c = static_cast<int>(c);
                }
            }
            labels[i] = best_c;
        }
        std::fill(fresh.begin(), fresh.end(), 0.0);
        std::fill(count.begin(), count.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = static_cast<std::size_t>(labels[i]);
            ++count[c];
            for (std::size_t t = 0; t < d; ++t) fresh[c * d + t] += x[i * d + t];
        }
        for (std::size_t c = 0; c < kk; ++c) {
            if (count[c] > 0) {
                for (std::size_t t = 0; t < d; ++t) fresh[c * d + t] /= static_cast<double>(count[c]);
            } else {
                // re-seed an empty cluster at the point farthest from its nearest center
                std::size_t far = 0;
                double far_dist = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double near = std::numeric_limits<double>::infinity();
                    for (std::size_t c2 = 0; c2 < kk; ++c2) {
                        near = std::min(near, sqdist_rows(x + i * d, &centers[c2 * d], d));
                    }
                    if (near > far_dist) {
                        far_dist = near;
                        far = i;
                    }
                }
                for (std::size_t t = 0; t < d; ++t) fresh[c * d + t] = x[far * d + t];
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < kk; ++c) {
            shift = std::max(shift, sqdist_rows(&fresh[c * d], &centers[c * d], d));
        }
        centers = fresh;
        if (std::sqrt(shift) < 1e-8) break;
    }

    // final assignment and objective
    KMeansResult result;
    result.labels.assign(n, 0);
    result.wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = sqdist_rows(x + i * d, &centers[0], d);
        int best_c = 0;
        for (std::size_t c = 1; c < kk; ++c) {
            const double dist = sqdist_rows(x + i * d, &centers[c * d], d);
            if (dist < best) {
                best = dist;
                best_c = static_cast<int>(c);
            }
        }
        result.labels[i] = best_c;
        result.wcss += best;
    }
    result.centers = Tensor::from_data({kk, d}, std::move(centers));
    return result;
}

ClusterCenters kmeans_init_centers(const Tensor& h, int k, std::uint64_t seed) {
    return {kmeans(h, k, seed).centers};
}

// ---- trident ----

TridentState::TridentState(AutoEncoderParams ae, const NormalizedAdjacency& adj_a,
                           const NormalizedAdjacency& adj_b, ClusterCenters centers,
                           const Config& cfg, bool identical_stream_init)
    : ae_(std::move(ae)),
      stream_a_([&] {
          Rng rng(derive_seed(cfg.seed, 0x67636e5f61ULL));
          return make_gcn_stream(ae_, rng);
      }()),
      stream_b_([&] {
          Rng rng(derive_seed(cfg.seed, identical_stream_init ? 0x67636e5f61ULL : 0x67636e5f62ULL));
          return make_gcn_stream(ae_, rng);
      }()),
      adj_a_(adj_a.to_tensor()),
      adj_b_(adj_b.to_tensor()),
      centers_(std::move(centers)),
      cfg_(cfg),
      registry_(),
      opt_([&] {
          validate(cfg_);
          if (adj_a.num_nodes != adj_b.num_nodes) {
              throw DimensionError("trident: adjacency operators disagree on N");
          }
          if (centers_.mu.shape() != Shape{ae_.bottleneck_width(), ae_.bottleneck_width()}) {
              throw DimensionError("trident: cluster centers must be KxK in bottleneck space");
          }
          register_params(registry_, "ae", ae_);
          for (std::size_t l = 0; l < stream_a_.weights.size(); ++l) {
              registry_.add("gcn_a.W" + std::to_string(l), stream_a_.weights[l]);
          }
          for (std::size_t l = 0; l < stream_b_.weights.size(); ++l) {
              registry_.add("gcn_b.W" + std::to_string(l), stream_b_.weights[l]);
          }
          return AdamOptimizer(registry_.tensors(), cfg_.learning_rate);
      }()) {}

TridentOutputs trident_forward(const AutoEncoderParams& ae, const GcnStreamParams& stream_a,
                               const GcnStreamParams& stream_b, const Tensor& adj_a,
                               const Tensor& adj_b, const Tensor& z_b, double sigma,
                               double gamma) {
    if (stream_a.weights.size() != ae.encoder.size() ||
        stream_b.weights.size() != ae.encoder.size()) {
        throw DimensionError("trident_forward: stream depth must match the encoder depth");
    }
    TridentOutputs out;
    out.encoder_layers = encoder_forward(ae, z_b);
    out.reconstruction = decoder_forward(ae, out.encoder_layers.back());

    const std::size_t num_layers = stream_a.weights.size();
    Tensor g_a = gcn_layer(adj_a, z_b, stream_a.weights[0], true);
    Tensor g_b = gcn_layer(adj_b, z_b, stream_b.weights[0], true);
    for (std::size_t l = 1; l < num_layers; ++l) {
        auto [fused_a, fused_b] =
            fuse_representations(g_a, g_b, out.encoder_layers[l - 1], sigma, gamma);
        const bool hidden = l + 1 < num_layers;
        g_a = gcn_layer(adj_a, fused_a, stream_a.weights[l], hidden);
        g_b = gcn_layer(adj_b, fused_b, stream_b.weights[l], hidden);
    }
    out.gs_a = row_softmax(g_a);
    out.gs_b = row_softmax(g_b);
    return out;
}

TridentOutputs TridentState::forward(const Tensor& z_b) const {
    return trident_forward(ae_, stream_a_, stream_b_, adj_a_, adj_b_, z_b, cfg_.fuse_sigma,
                           cfg_.fuse_gamma);
}

namespace {

double max_rowsum_deviation(const Tensor& m) {
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols(); ++j) s += m.at(i, j);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

}  // namespace

Phase2Report train_phase2_iteration(TridentState& state, const Tensor& z_b, int iteration) {
    const Config& cfg = state.config();
    TridentOutputs out = state.forward(z_b);

    Tensor re = mgcn_reconstruction_loss(z_b, out.reconstruction);
    SoftAssignment assignment =
        student_t_assignment(out.encoder_layers.back(), state.centers(), cfg.t_dof);
    TargetDistribution target = target_distribution(assignment.q);  // constant this iteration

    Tensor cluster = kl_divergence(target.p, assignment.q);
    Tensor kl_a = kl_divergence(target.p, out.gs_a);
    Tensor kl_b = kl_divergence(target.p, out.gs_b);
    Tensor total = l2_total(re, cluster, kl_a, kl_b, cfg.alpha, cfg.beta, cfg.eta);

    backward(total);
    state.optimizer().step();
    state.params().zero_grads();

    Phase2Report report;
    report.re_loss = re.item();
    report.cluster_loss = cluster.item();
    report.kl_a = kl_a.item();
    report.kl_b = kl_b.item();
    report.total = total.item();
    report.iteration = iteration;
    report.max_rowsum_deviation =
        std::max(std::max(max_rowsum_deviation(assignment.q), max_rowsum_deviation(target.p)),
                 std::max(max_rowsum_deviation(out.gs_a), max_rowsum_deviation(out.gs_b)));
    return report;
}

std::vector<int> assign_clusters(const Tensor& gs_a, const Tensor& gs_b) {
    if (gs_a.shape() != gs_b.shape()) {
        throw DimensionError("assign_clusters: stream shapes differ");
    }
    const std::size_t n = gs_a.rows(), k = gs_a.cols();
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double best = -1.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double avg = (gs_a.at(i, j) + gs_b.at(i, j)) / 2.0;
            if (avg > best) {  // strict: ties stay at the lower index
                best = avg;
                labels[i] = static_cast<int>(j);
            }
        }
    }
    return labels;
}

}  // namespace icicle
