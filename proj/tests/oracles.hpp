// Independent brute-force reference implementations used as test oracles.
// Everything here is plain double loops with no dependency on the library's
// tensor/autodiff path, so a bug cannot hide in both sides at once.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat matmul(const Mat& a, const Mat& b) {
    const std::size_t m = a.size(), k = a[0].size(), n = b[0].size();
    Mat c(m, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < k; ++t) c[i][j] += a[i][t] * b[t][j];
    return c;
}

// valid cross-correlation, sliding window
inline Mat conv2d_single(const Mat& input, const Mat& kernel, std::size_t stride) {
    const std::size_t h = input.size(), w = input[0].size();
    const std::size_t kh = kernel.size(), kw = kernel[0].size();
    const std::size_t oh = (h - kh) / stride + 1, ow = (w - kw) / stride + 1;
    Mat out(oh, std::vector<double>(ow, 0.0));
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
            for (std::size_t u = 0; u < kh; ++u)
                for (std::size_t v = 0; v < kw; ++v)
                    out[i][j] += input[i * stride + u][j * stride + v] * kernel[u][v];
    return out;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    return dot(a, b) / (norm(a) * norm(b));
}

inline double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double heat_kernel(const std::vector<double>& a, const std::vector<double>& b, double t) {
    return std::exp(-sqdist(a, b) / t);
}

// Literal two-view contrastive loss: for anchor i of view a the denominator
// sums exp(s(i, j same view)/tau) + exp(s(i, j other view)/tau) over all j,
// including j == i in the same view. Mean over all 2R anchors.
inline double two_view_contrastive(const Mat& rows_a, const Mat& rows_b, double tau) {
    const std::size_t r = rows_a.size();
    double total = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
        double den_a = 0.0, den_b = 0.0;
        for (std::size_t j = 0; j < r; ++j) {
            den_a += std::exp(cosine(rows_a[i], rows_a[j]) / tau) +
                     std::exp(cosine(rows_a[i], rows_b[j]) / tau);
            den_b += std::exp(cosine(rows_b[i], rows_b[j]) / tau) +
                     std::exp(cosine(rows_b[i], rows_a[j]) / tau);
        }
        const double pos = std::exp(cosine(rows_a[i], rows_b[i]) / tau);
        total += -std::log(pos / den_a) + -std::log(pos / den_b);
    }
    return total / (2.0 * static_cast<double>(r));
}

inline Mat transpose(const Mat& a) {
    Mat t(a[0].size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) t[j][i] = a[i][j];
    return t;
}

inline double entropy_of_column_means(const Mat& w) {
    const std::size_t n = w.size(), k = w[0].size();
    double h = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
        double p = 0.0;
        for (std::size_t i = 0; i < n; ++i) p += w[i][j];
        p /= static_cast<double>(n);
        if (p > 0.0) h -= p * std::log(p);  // 0 ln 0 = 0
    }
    return h;
}

// Eqs as printed: column contrast minus the two entropy terms.
inline double cluster_contrastive(const Mat& w_a, const Mat& w_b, double tau) {
    return two_view_contrastive(transpose(w_a), transpose(w_b), tau) -
           entropy_of_column_means(w_a) - entropy_of_column_means(w_b);
}

inline double frobenius_sq(const Mat& a, const Mat& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[0].size(); ++j) {
            const double d = a[i][j] - b[i][j];
            s += d * d;
        }
    return s;
}

inline Mat student_t(const Mat& h, const Mat& mu, double t) {
    const std::size_t n = h.size(), k = mu.size();
    Mat q(n, std::vector<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            q[i][j] = std::pow(1.0 + sqdist(h[i], mu[j]) / t, -(t + 1.0) / 2.0);
            s += q[i][j];
        }
        for (std::size_t j = 0; j < k; ++j) q[i][j] /= s;
    }
    return q;
}

inline Mat target_distribution(const Mat& q) {
    const std::size_t n = q.size(), k = q[0].size();
    std::vector<double> f(k, 0.0);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) f[j] += q[i][j];
    Mat p(n, std::vector<double>(k));
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            p[i][j] = q[i][j] * q[i][j] / f[j];
            s += p[i][j];
        }
        for (std::size_t j = 0; j < k; ++j) p[i][j] /= s;
    }
    return p;
}

inline double kl(const Mat& p, const Mat& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p[0].size(); ++j) {
            if (p[i][j] > 0.0) s += p[i][j] * std::log(p[i][j] / r[i][j]);
        }
    return s;
}

// exhaustive k-NN: per node, the k smallest squared distances, ties to lower index
inline std::vector<std::vector<int>> knn_exhaustive(const Mat& points, std::size_t k) {
    const std::size_t n = points.size();
    std::vector<std::vector<int>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> cand;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            cand.emplace_back(sqdist(points[i], points[j]), static_cast<int>(j));
        }
        std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first < b.first;
            return a.second < b.second;
        });
        for (std::size_t t = 0; t < k; ++t) nbrs[i].push_back(cand[t].second);
    }
    return nbrs;
}

// dense normalized adjacency from an adjacency matrix (0/1, zero diagonal)
inline Mat normalized_adjacency(const std::vector<std::vector<int>>& adj) {
    const std::size_t n = adj.size();
    std::vector<double> deg(n, 0.0);
    Mat a_tilde(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) a_tilde[i][j] = adj[i][j];
        a_tilde[i][i] = 1.0;
        for (std::size_t j = 0; j < n; ++j) deg[i] += a_tilde[i][j];
    }
    Mat out(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out[i][j] = a_tilde[i][j] / std::sqrt(deg[i] * deg[j]);
    return out;
}

// ---- clustering metric oracles ----

// ACC by exhaustive permutation of predicted labels (K <= ~8)
inline double acc_by_permutation(const std::vector<int>& truth, const std::vector<int>& pred,
                                 int k) {
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 0.0;
    do {
        int hit = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            if (truth[i] == perm[pred[i]]) ++hit;
        }
        best = std::max(best, static_cast<double>(hit) / truth.size());
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// ARI by O(N^2) pair counting
inline double ari_by_pairs(const std::vector<int>& truth, const std::vector<int>& pred) {
    const std::size_t n = truth.size();
    double a = 0, b = 0, c = 0, d = 0;  // same-same, same-diff, diff-same, diff-diff
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool st = truth[i] == truth[j];
            const bool sp = pred[i] == pred[j];
            if (st && sp) ++a;
            else if (st && !sp) ++b;
            else if (!st && sp) ++c;
            else ++d;
        }
    }
    const double total = a + b + c + d;
    const double expected = (a + b) * (a + c) / total;
    const double maximum = ((a + b) + (a + c)) / 2.0;
    if (maximum == expected) return (b == 0 && c == 0) ? 1.0 : 0.0;
    return (a - expected) / (maximum - expected);
}

// NMI with geometric-mean normalization from the contingency table
inline double nmi_contingency(const std::vector<int>& truth, const std::vector<int>& pred) {
    const double n = static_cast<double>(truth.size());
    std::map<int, double> pt, pp;
    std::map<std::pair<int, int>, double> joint;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        pt[truth[i]] += 1.0;
        pp[pred[i]] += 1.0;
        joint[{truth[i], pred[i]}] += 1.0;
    }
    double ht = 0.0, hp = 0.0, mi = 0.0;
    for (auto& [_, v] : pt) ht -= (v / n) * std::log(v / n);
    for (auto& [_, v] : pp) hp -= (v / n) * std::log(v / n);
    for (auto& [key, v] : joint) {
        const double pxy = v / n;
        mi += pxy * std::log(pxy / ((pt[key.first] / n) * (pp[key.second] / n)));
    }
    if (ht == 0.0 && hp == 0.0) return 1.0;
    if (ht == 0.0 || hp == 0.0) return 0.0;
    return mi / std::sqrt(ht * hp);
}

}  // namespace oracle
