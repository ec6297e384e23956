#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "icicle/tensor.hpp"

namespace icicle {

/// Symmetric k-NN adjacency over N nodes, dense 0/1 storage.
struct KnnGraph {
    std::size_t num_nodes = 0;
    std::size_t k = 0;
    std::vector<std::uint8_t> adjacency;  // N*N, zero diagonal, symmetric
    std::vector<double> similarity;       // N*N heat-kernel values; empty unless retained

    bool edge(std::size_t i, std::size_t j) const { return adjacency[i * num_nodes + j] != 0; }
    std::size_t degree(std::size_t i) const;
};

/// exp(-||z_i - z_j||^2 / t)
double heat_kernel_similarity(std::span<const double> z_i, std::span<const double> z_j,
                              double t_heat);

/// Connect each node to its k most similar nodes (ties to the lower index),
/// then symmetrize by OR.
KnnGraph build_knn_graph(const Tensor& features, std::size_t k, double t_heat,
                         bool keep_similarity = false);

/// Dense D^-1/2 (A+I) D^-1/2 with per-graph degrees.
struct NormalizedAdjacency {
    std::size_t num_nodes = 0;
    std::vector<double> values;  // N*N, symmetric

    double at(std::size_t i, std::size_t j) const { return values[i * num_nodes + j]; }
    Tensor to_tensor() const;
};

NormalizedAdjacency normalize_adjacency(const KnnGraph& graph);

/// One undirected edge "i j" per line with i < j, sorted.
void write_edge_list(const KnnGraph& graph, std::ostream& os);

}  // namespace icicle
