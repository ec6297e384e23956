#include "icicle/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "icicle/errors.hpp"

namespace icicle {

namespace {

void require_same_length(const Partition& truth, const Partition& pred) {
    if (truth.labels.size() != pred.labels.size()) {
        throw ContractError("partitions have different lengths: " +
                            std::to_string(truth.labels.size()) + " vs " +
                            std::to_string(pred.labels.size()));
    }
}

long long choose2(long long n) { return n * (n - 1) / 2; }

}  // namespace

Partition Partition::from_labels(std::vector<int> labels) {
    int k = 0;
    for (int v : labels) k = std::max(k, v + 1);
    Partition p{std::move(labels), k};
    validate(p);
    return p;
}

void validate(const Partition& p) {
    for (int v : p.labels) {
        if (v < 0 || v >= p.num_clusters) {
            throw ContractError("partition label " + std::to_string(v) + " outside [0, " +
                                std::to_string(p.num_clusters) + ")");
        }
    }
}

long long ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0LL);
}

ConfusionMatrix confusion_matrix(const Partition& truth, const Partition& pred) {
    require_same_length(truth, pred);
    validate(truth);
    validate(pred);
    ConfusionMatrix cm;
    cm.num_true = static_cast<std::size_t>(truth.num_clusters);
    cm.num_pred = static_cast<std::size_t>(pred.num_clusters);
    cm.counts.assign(cm.num_true * cm.num_pred, 0);
    for (std::size_t n = 0; n < truth.labels.size(); ++n) {
        ++cm.counts[static_cast<std::size_t>(truth.labels[n]) * cm.num_pred +
                    static_cast<std::size_t>(pred.labels[n])];
    }
    return cm;
}

void write_confusion_csv(const ConfusionMatrix& cm, std::ostream& os) {
    os << "true\\pred";
    for (std::size_t j = 0; j < cm.num_pred; ++j) os << "," << j;
    os << "\n";
    for (std::size_t i = 0; i < cm.num_true; ++i) {
        os << i;
        for (std::size_t j = 0; j < cm.num_pred; ++j) os << "," << cm.at(i, j);
        os << "\n";
    }
}

// Hungarian algorithm with row/column potentials, O(n^3).
std::vector<int> hungarian_min_assignment(const std::vector<long long>& cost, std::size_t n) {
    constexpr long long kInf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> u(n + 1, 0), v(n + 1, 0);
    std::vector<int> match(n + 1, 0);  // match[col 1..n] = row, 1-based
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = static_cast<int>(i);
        std::size_t j0 = 0;
        std::vector<long long> minv(n + 1, kInf);
        std::vector<char> used(n + 1, false);
        std::vector<int> way(n + 1, 0);
        do {
            used[j0] = true;
            const std::size_t i0 = static_cast<std::size_t>(match[j0]);
            long long delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const long long cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = static_cast<int>(j0);
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[static_cast<std::size_t>(match[j])] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = static_cast<std::size_t>(way[j0]);
            match[j0] = match[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n, -1);
    for (std::size_t j = 1; j <= n; ++j) {
        if (match[j] > 0) row_to_col[static_cast<std::size_t>(match[j] - 1)] = static_cast<int>(j - 1);
    }
    return row_to_col;
}

double clustering_accuracy(const Partition& truth, const Partition& pred) {
    require_same_length(truth, pred);
    if (truth.labels.empty()) return 1.0;
    const ConfusionMatrix cm = confusion_matrix(truth, pred);
    // pad to square so unmatched clusters cost nothing
    const std::size_t n = std::max(cm.num_true, cm.num_pred);
    std::vector<long long> cost(n * n, 0);
    for (std::size_t i = 0; i < cm.num_true; ++i) {
        for (std::size_t j = 0; j < cm.num_pred; ++j) cost[i * n + j] = -cm.at(i, j);
    }
    const std::vector<int> assign = hungarian_min_assignment(cost, n);
    long long matched = 0;
    for (std::size_t i = 0; i < cm.num_true; ++i) {
        const std::size_t j = static_cast<std::size_t>(assign[i]);
        if (j < cm.num_pred) matched += cm.at(i, j);
    }
    return static_cast<double>(matched) / static_cast<double>(truth.labels.size());
}

double nmi(const Partition& truth, const Partition& pred) {
    require_same_length(truth, pred);
    const ConfusionMatrix cm = confusion_matrix(truth, pred);
    const double n = static_cast<double>(truth.labels.size());
    std::vector<double> row(cm.num_true, 0.0), col(cm.num_pred, 0.0);
    for (std::size_t i = 0; i < cm.num_true; ++i)
        for (std::size_t j = 0; j < cm.num_pred; ++j) {
            row[i] += static_cast<double>(cm.at(i, j));
            col[j] += static_cast<double>(cm.at(i, j));
        }
    double h_true = 0.0, h_pred = 0.0, mi = 0.0;
    for (double r : row) {
        if (r > 0) h_true -= (r / n) * std::log(r / n);
    }
    for (double c : col) {
        if (c > 0) h_pred -= (c / n) * std::log(c / n);
    }
    for (std::size_t i = 0; i < cm.num_true; ++i) {
        for (std::size_t j = 0; j < cm.num_pred; ++j) {
            const double joint = static_cast<double>(cm.at(i, j));
            if (joint > 0) mi += (joint / n) * std::log(joint * n / (row[i] * col[j]));
        }
    }
    if (h_true == 0.0 && h_pred == 0.0) return 1.0;  // both single-cluster, identical
    if (h_true == 0.0 || h_pred == 0.0) return 0.0;
    return mi / std::sqrt(h_true * h_pred);
}

double ari(const Partition& truth, const Partition& pred) {
    require_same_length(truth, pred);
    const ConfusionMatrix cm = confusion_matrix(truth, pred);
    const long long n = static_cast<long long>(truth.labels.size());
    long long index = 0, sum_rows = 0, sum_cols = 0;
    std::vector<long long> row(cm.num_true, 0), col(cm.num_pred, 0);
    for (std::size_t i = 0; i < cm.num_true; ++i) {
        for (std::size_t j = 0; j < cm.num_pred; ++j) {
            index += choose2(cm.at(i, j));
            row[i] += cm.at(i, j);
            col[j] += cm.at(i, j);
        }
    }
    for (long long r : row) sum_rows += choose2(r);
    for (long long c : col) sum_cols += choose2(c);
    const double pairs = static_cast<double>(choose2(n));
    const double expected = static_cast<double>(sum_rows) * static_cast<double>(sum_cols) / pairs;
    const double maximum = (static_cast<double>(sum_rows) + static_cast<double>(sum_cols)) / 2.0;
    if (maximum == expected) {
        // degenerate: both partitions trivial; identical up to relabeling iff index saturates
        return (static_cast<double>(index) == maximum) ? 1.0 : 0.0;
    }
    return (static_cast<double>(index) - expected) / (maximum - expected);
}

}  // namespace icicle
