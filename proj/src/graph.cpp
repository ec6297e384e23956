#include "icicle/graph.hpp"

#include <algorithm>
#include <cmath>

#include "icicle/errors.hpp"

namespace icicle {

std::size_t KnnGraph::degree(std::size_t i) const {
    std::size_t d = 0;
    for (std::size_t j = 0; j < num_nodes; ++j) d += adjacency[i * num_nodes + j];
    return d;
}

double heat_kernel_similarity(std::span<const double> z_i, std::span<const double> z_j,
                              double t_heat) {
    if (t_heat <= 0.0) throw ConfigError("heat kernel: t must be positive");
    if (z_i.size() != z_j.size()) {
        throw DimensionError("heat kernel: vectors of length " + std::to_string(z_i.size()) +
                             " vs " + std::to_string(z_j.size()));
    }
    double d2 = 0.0;
    for (std::size_t t = 0; t < z_i.size(); ++t) {
        const double d = z_i[t] - z_j[t];
        d2 += d * d;
    }
    return std::exp(-d2 / t_heat);
}

KnnGraph build_knn_graph(const Tensor& features, std::size_t k, double t_heat,
                         bool keep_similarity) {
    if (features.shape().size() != 2) {
        throw DimensionError("build_knn_graph: expected 2-D feature matrix, got " +
                             shape_str(features.shape()));
    }
    if (t_heat <= 0.0) throw ConfigError("build_knn_graph: t_heat must be positive");
    const std::size_t n = features.shape()[0];
    const std::size_t d = features.shape()[1];
    if (k < 1 || k >= n) {
        throw ConfigError("build_knn_graph: k must satisfy 1 <= k < N, got k=" +
                          std::to_string(k) + ", N=" + std::to_string(n));
    }
    const double* z = features.data().data();

    // pairwise squared distances; ranking by heat-kernel similarity equals
    // ranking by negated squared distance
    std::vector<double> dist2(n * n, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t t = 0; t < d; ++t) {
                const double diff = z[i * d + t] - z[j * d + t];
                s += diff * diff;
            }
            dist2[i * n + j] = s;
        }
    }

    KnnGraph g;
    g.num_nodes = n;
    g.k = k;
    g.adjacency.assign(n * n, 0);
    if (keep_similarity) {
        g.similarity.resize(n * n);
        for (std::size_t i = 0; i < n * n; ++i) g.similarity[i] = std::exp(-dist2[i] / t_heat);
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) order[j] = j;
        // smallest distance first, ties to the lower node index; self excluded
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (dist2[i * n + a] != dist2[i * n + b]) return dist2[i * n + a] < dist2[i * n + b];
            return a < b;
        });
        std::size_t taken = 0;
        for (std::size_t idx = 0; idx < n && taken < k; ++idx) {
            const std::size_t j = order[idx];
            if (j == i) continue;
            g.adjacency[i * n + j] = 1;  // directed pick; symmetrized below
            ++taken;
        }
    }
    // symmetrize by OR
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const std::uint8_t e = g.adjacency[i * n + j] | g.adjacency[j * n + i];
            g.adjacency[i * n + j] = e;
            g.adjacency[j * n + i] = e;
        }
        g.adjacency[i * n + i] = 0;
    }
    return g;
}

NormalizedAdjacency normalize_adjacency(const KnnGraph& graph) {
    const std::size_t n = graph.num_nodes;
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 1.0;  // self-loop
        for (std::size_t j = 0; j < n; ++j) deg += graph.adjacency[i * n + j];
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }
    NormalizedAdjacency out;
    out.num_nodes = n;
    out.values.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double a_tilde = (i == j) ? 1.0 : static_cast<double>(graph.adjacency[i * n + j]);
            out.values[i * n + j] = a_tilde * inv_sqrt_deg[i] * inv_sqrt_deg[j];
        }
    }
    return out;
}

Tensor NormalizedAdjacency::to_tensor() const {
    return Tensor::from_data({num_nodes, num_nodes}, values);
}

void write_edge_list(const KnnGraph& graph, std::ostream& os) {
    for (std::size_t i = 0; i < graph.num_nodes; ++i) {
        for (std::size_t j = i + 1; j < graph.num_nodes; ++j) {
            if (graph.edge(i, j)) os << i << " " << j << "\n";
        }
    }
}

}  // namespace icicle
