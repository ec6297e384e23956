#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

namespace icicle {

/// Hard cluster assignment over N samples.
struct Partition {
    std::vector<int> labels;
    int num_clusters = 0;

    static Partition from_labels(std::vector<int> labels);  // infers num_clusters
};

void validate(const Partition& p);

struct ConfusionMatrix {
    std::size_t num_true = 0;
    std::size_t num_pred = 0;
    std::vector<long long> counts;  // row-major num_true x num_pred

    long long at(std::size_t i, std::size_t j) const { return counts[i * num_pred + j]; }
    long long total() const;
};

ConfusionMatrix confusion_matrix(const Partition& truth, const Partition& pred);
void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& os);

/// Best-match accuracy: maximum fraction of agreeing samples over all
/// cluster-to-class assignments, solved exactly by the Hungarian algorithm.
double clustering_accuracy(const Partition& truth, const Partition& pred);

/// Normalized mutual information, geometric-mean normalization, natural logs.
double nmi(const Partition& truth, const Partition& pred);

/// Adjusted Rand index from pairwise contingency counts.
double ari(const Partition& truth, const Partition& pred);

/// Minimum-cost perfect assignment on a square cost matrix (row i -> match[i]).
std::vector<int> hungarian_min_assignment(const std::vector<long long>& cost, std::size_t n);

}  // namespace icicle
