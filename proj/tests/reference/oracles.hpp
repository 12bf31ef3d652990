#pragma once

// Test-only reference implementations on plain double buffers. These are
// deliberately independent transcriptions (straight loops, no shared helpers
// with the library) used as oracles by the unit and acceptance suites.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  int m, int k, int n) {
    std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk)
                s += a[static_cast<std::size_t>(i * k + kk)] * b[static_cast<std::size_t>(kk * n + j)];
            out[static_cast<std::size_t>(i * n + j)] = s;
        }
    return out;
}

inline std::vector<double> softmax(const std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - mx);
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
    return out;
}

// S[i][j] = x_i . x_j / (tau * |x_i| * |x_j|)
inline std::vector<double> cosine_similarity(const std::vector<double>& x, int b, int e,
                                             double tau) {
    std::vector<double> out(static_cast<std::size_t>(b * b));
    for (int i = 0; i < b; ++i)
        for (int j = 0; j < b; ++j) {
            double dot = 0.0, ni = 0.0, nj = 0.0;
            for (int c = 0; c < e; ++c) {
                const double xi = x[static_cast<std::size_t>(i * e + c)];
                const double xj = x[static_cast<std::size_t>(j * e + c)];
                dot += xi * xj;
                ni += xi * xi;
                nj += xj * xj;
            }
            out[static_cast<std::size_t>(i * b + j)] = dot / (tau * std::sqrt(ni) * std::sqrt(nj));
        }
    return out;
}

// Brute-force double loop:
//   L = -(1/B) sum_i [sum_{j != i, y_j == y_i} w_i exp(S_ij)] / [sum_{k != i} exp(S_ik)]
// Anchors without positives contribute 0.
inline double contrastive(const std::vector<double>& s, const std::vector<int>& labels,
                          const std::vector<double>& w, int b) {
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        double numer = 0.0, denom = 0.0;
        bool has_pos = false;
        for (int j = 0; j < b; ++j) {
            if (j == i) continue;
            const double e = std::exp(s[static_cast<std::size_t>(i * b + j)]);
            denom += e;
            if (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
                numer += w[static_cast<std::size_t>(i)] * e;
                has_pos = true;
            }
        }
        if (has_pos) total += numer / denom;
    }
    return -total / b;
}

inline double cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels,
                            int b, int k) {
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        double mx = logits[static_cast<std::size_t>(i * k)];
        for (int j = 1; j < k; ++j)
            mx = std::max(mx, logits[static_cast<std::size_t>(i * k + j)]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(logits[static_cast<std::size_t>(i * k + j)] - mx);
        const double logp =
            logits[static_cast<std::size_t>(i * k + labels[static_cast<std::size_t>(i)])] - mx -
            std::log(sum);
        total -= logp;
    }
    return total / b;
}

// One decoupled-weight-decay Adam step on a single coordinate.
struct AdamwCoord {
    double m = 0.0, v = 0.0;
};
inline double adamw_single(double p, double g, AdamwCoord& st, long step, double lr, double wd,
                           double b1, double b2, double eps) {
    p -= lr * wd * p;
    st.m = b1 * st.m + (1.0 - b1) * g;
    st.v = b2 * st.v + (1.0 - b2) * g * g;
    const double mhat = st.m / (1.0 - std::pow(b1, static_cast<double>(step)));
    const double vhat = st.v / (1.0 - std::pow(b2, static_cast<double>(step)));
    return p - lr * mhat / (std::sqrt(vhat) + eps);
}

// Adaptive average pooling by explicit window enumeration.
inline std::vector<double> adaptive_pool(const std::vector<double>& x, int out_len) {
    const int n = static_cast<int>(x.size());
    std::vector<double> out(static_cast<std::size_t>(out_len));
    for (int i = 0; i < out_len; ++i) {
        const int lo = i * n / out_len;
        const int hi = (i + 1) * n / out_len;
        double acc = 0.0;
        for (int k = lo; k < hi; ++k) acc += x[static_cast<std::size_t>(k)];
        out[static_cast<std::size_t>(i)] = acc / (hi - lo);
    }
    return out;
}

}  // namespace oracle
