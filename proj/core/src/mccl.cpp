#include "micacl/mccl.hpp"

#include <algorithm>
#include <cmath>

#include "micacl/errors.hpp"

namespace micacl {

void ClassStats::validate() const {
    if (counts.size() < 2)
        throw ConfigError("class stats: need at least 2 classes, got " +
                          std::to_string(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] < 1)
            throw ConfigError("class stats: class " + std::to_string(i) + " has count " +
                              std::to_string(counts[i]) + ", expected >= 1");
    if (!(tau0 > 0.0)) throw ConfigError("class stats: tau0 must be positive");
}

ScaleSet ScaleSet::init(std::vector<int> scales, int in_width, int embed_width, Rng& rng) {
    ScaleSet ss;
    ss.scales = std::move(scales);
    ss.in_width = in_width;
    ss.embed_width = embed_width;
    ss.validate();
    for (int s : ss.scales) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(s));
        ss.projections.push_back(Tensor::uniform({s, embed_width}, -bound, bound, rng, true));
    }
    return ss;
}

void ScaleSet::validate() const {
    if (scales.empty()) throw ConfigError("scale set: empty");
    if (embed_width < 1) throw ConfigError("scale set: embed width must be >= 1");
    int prev = 0;
    for (int s : scales) {
        if (s <= prev)
            throw ConfigError("scale set: scales must be strictly increasing and positive");
        if (s > in_width)
            throw ConfigError("scale set: scale " + std::to_string(s) + " exceeds feature width " +
                              std::to_string(in_width));
        prev = s;
    }
}

std::vector<std::pair<std::string, Tensor>> ScaleSet::named(const std::string& prefix) const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t i = 0; i < scales.size(); ++i)
        out.emplace_back(prefix + ".proj_s" + std::to_string(scales[i]), projections[i]);
    return out;
}

Tensor class_weights(const ClassStats& stats, const Tensor& logits,
                     const std::vector<int>& labels) {
    stats.validate();
    if (logits.rank() != 2)
        throw ShapeError("class_weights: expected [B x K] logits, got " + shape_str(logits.shape()));
    const int batch = logits.dim(0);
    const int k = logits.dim(1);
    if (k != stats.num_classes())
        throw ConfigError("class_weights: logits width " + std::to_string(k) +
                          " does not match class count " + std::to_string(stats.num_classes()));
    if (static_cast<int>(labels.size()) != batch)
        throw ShapeError("class_weights: label count does not match batch size");

    const auto& lv = logits.values();
    std::vector<double> w(static_cast<std::size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        const int label = labels[static_cast<std::size_t>(b)];
        if (label < 0 || label >= k)
            throw ConfigError("class_weights: label " + std::to_string(label) +
                              " outside [0, " + std::to_string(k) + ")");
        const double* row = lv.data() + static_cast<std::size_t>(b * k);
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        const double p = std::exp(row[label] - mx) / sum;
        w[static_cast<std::size_t>(b)] =
            (1.0 - p) / static_cast<double>(stats.counts[static_cast<std::size_t>(label)]);
    }
    return Tensor::from({batch}, std::move(w), false);
}

std::vector<Tensor> multiscale_project(const Tensor& x_bag, const ScaleSet& scale_set) {
    if (x_bag.rank() != 2)
        throw ShapeError("multiscale_project: expected [B x C_h], got " + shape_str(x_bag.shape()));
    if (x_bag.dim(1) != scale_set.in_width)
        throw ConfigError("multiscale_project: feature width " + std::to_string(x_bag.dim(1)) +
                          " does not match scale set width " + std::to_string(scale_set.in_width));
    std::vector<Tensor> out;
    out.reserve(scale_set.scales.size());
    for (std::size_t i = 0; i < scale_set.scales.size(); ++i)
        out.push_back(matmul(adaptive_avg_pool(x_bag, scale_set.scales[i]),
                             scale_set.projections[i]));
    return out;
}

double dynamic_temperature(const ClassStats& stats) {
    stats.validate();
    const double mx = static_cast<double>(*std::max_element(stats.counts.begin(), stats.counts.end()));
    double sum = 0.0;
    for (int c : stats.counts) sum += 1.0 + static_cast<double>(c) / mx;
    return stats.tau0 * sum / static_cast<double>(stats.num_classes());
}

Tensor similarity_matrix(const Tensor& x, double tau) {
    if (x.rank() != 2)
        throw ShapeError("similarity_matrix: expected [B x E], got " + shape_str(x.shape()));
    if (!(tau > 0.0)) throw NumericError("similarity_matrix: tau must be positive");
    const int batch = x.dim(0);
    const int width = x.dim(1);
    const auto& xv = x.values();

    std::vector<double> norm(static_cast<std::size_t>(batch));
    std::vector<double> unit(xv.size());
    for (int i = 0; i < batch; ++i) {
        double sq = 0.0;
        for (int e = 0; e < width; ++e) {
            const double v = xv[static_cast<std::size_t>(i * width + e)];
            sq += v * v;
        }
        const double n = std::sqrt(sq);
        if (n < 1e-12)
            throw NumericError("similarity_matrix: embedding row " + std::to_string(i) +
                               " is degenerate (norm " + std::to_string(n) + ")");
        norm[static_cast<std::size_t>(i)] = n;
        for (int e = 0; e < width; ++e)
            unit[static_cast<std::size_t>(i * width + e)] =
                xv[static_cast<std::size_t>(i * width + e)] / n;
    }

    std::vector<double> s(static_cast<std::size_t>(batch * batch));
    for (int i = 0; i < batch; ++i)
        for (int j = 0; j < batch; ++j) {
            double dot = 0.0;
            for (int e = 0; e < width; ++e)
                dot += unit[static_cast<std::size_t>(i * width + e)] *
                       unit[static_cast<std::size_t>(j * width + e)];
            s[static_cast<std::size_t>(i * batch + j)] = dot / tau;
        }

    // d x_i = (1 / (tau * ||x_i||)) * P_i * sum_j (G_ij + G_ji) u_j,
    // with P_i the projection onto the tangent of the unit sphere at u_i.
    return Tensor::make_op(
        {batch, batch}, std::move(s), {x},
        [batch, width, tau, norm = std::move(norm), unit = std::move(unit)](detail::Node& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            auto& g = p->ensure_grad();
            std::vector<double> du(static_cast<std::size_t>(width));
            for (int i = 0; i < batch; ++i) {
                std::fill(du.begin(), du.end(), 0.0);
                for (int j = 0; j < batch; ++j) {
                    const double m = self.grad[static_cast<std::size_t>(i * batch + j)] +
                                     self.grad[static_cast<std::size_t>(j * batch + i)];
                    if (m == 0.0) continue;
                    for (int e = 0; e < width; ++e)
                        du[static_cast<std::size_t>(e)] +=
                            m * unit[static_cast<std::size_t>(j * width + e)];
                }
                double along = 0.0;
                for (int e = 0; e < width; ++e)
                    along += du[static_cast<std::size_t>(e)] *
                             unit[static_cast<std::size_t>(i * width + e)];
                const double inv = 1.0 / (tau * norm[static_cast<std::size_t>(i)]);
                for (int e = 0; e < width; ++e)
                    g[static_cast<std::size_t>(i * width + e)] +=
                        inv * (du[static_cast<std::size_t>(e)] -
                               along * unit[static_cast<std::size_t>(i * width + e)]);
            }
        });
}

Tensor contrastive_loss_scale(const Tensor& s_mat, const std::vector<int>& labels,
                              const Tensor& w_c, bool log_form) {
    if (s_mat.rank() != 2 || s_mat.dim(0) != s_mat.dim(1))
        throw ShapeError("contrastive_loss_scale: expected a square similarity matrix, got " +
                         shape_str(s_mat.shape()));
    const int batch = s_mat.dim(0);
    if (batch < 2)
        throw NumericError("contrastive_loss_scale: batch size must be >= 2, got " +
                           std::to_string(batch));
    if (static_cast<int>(labels.size()) != batch)
        throw ShapeError("contrastive_loss_scale: label count does not match batch size");
    if (w_c.size() != batch)
        throw ShapeError("contrastive_loss_scale: weight count does not match batch size");

    const std::vector<double> weights = w_c.values();
    const std::vector<int> labs = labels;

    // Shifted per-row sums over the given matrix; the shift cancels in every
    // ratio, so exponent arguments never exceed 0.
    auto row_sums = [batch](const std::vector<double>& s, const std::vector<int>& lab, int i,
                            double& numer, double& denom, double& shift) {
        const double* row = s.data() + static_cast<std::size_t>(i * batch);
        shift = row[0];
        for (int k = 1; k < batch; ++k) shift = std::max(shift, row[k]);
        numer = 0.0;
        denom = 0.0;
        for (int k = 0; k < batch; ++k) {
            if (k == i) continue;
            const double e = std::exp(row[k] - shift);
            denom += e;
            if (lab[static_cast<std::size_t>(k)] == lab[static_cast<std::size_t>(i)]) numer += e;
        }
    };

    const auto& sv = s_mat.values();
    double loss = 0.0;
    for (int i = 0; i < batch; ++i) {
        double numer, denom, shift;
        row_sums(sv, labs, i, numer, denom, shift);
        if (numer == 0.0) continue;  // no positives for this anchor
        if (denom == 0.0)
            throw NumericError("contrastive_loss_scale: denominator underflow at anchor " +
                               std::to_string(i));
        const double ratio = weights[static_cast<std::size_t>(i)] * numer / denom;
        if (log_form) {
            if (ratio > 0.0) loss += std::log(ratio);
        } else {
            loss += ratio;
        }
    }
    loss = -loss / batch;

    return Tensor::make_op(
        {}, {loss}, {s_mat},
        [batch, labs, weights, log_form, row_sums](detail::Node& self) {
            auto& p = self.parents[0];
            if (!p->requires_grad) return;
            auto& g = p->ensure_grad();
            const double upstream = self.grad[0];
            for (int i = 0; i < batch; ++i) {
                double numer, denom, shift;
                row_sums(p->value, labs, i, numer, denom, shift);
                if (numer == 0.0 || denom == 0.0) continue;
                const double w = weights[static_cast<std::size_t>(i)];
                if (log_form && !(w * numer / denom > 0.0)) continue;
                for (int k = 0; k < batch; ++k) {
                    if (k == i) continue;
                    const double e =
                        std::exp(p->value[static_cast<std::size_t>(i * batch + k)] - shift);
                    const bool positive =
                        labs[static_cast<std::size_t>(k)] == labs[static_cast<std::size_t>(i)];
                    double d;
                    if (log_form) {
                        // d(-log(w N / D))/dS_ik = e/D - [pos] e/N
                        d = e / denom - (positive ? e / numer : 0.0);
                    } else {
                        // d(-w N / D)/dS_ik = -w e ([pos] D - N) / D^2
                        d = -w * e * ((positive ? denom : 0.0) - numer) / (denom * denom);
                    }
                    g[static_cast<std::size_t>(i * batch + k)] += upstream * d / batch;
                }
            }
        });
}

Tensor mccl_loss(const Tensor& x_bag, const std::vector<int>& labels, const ClassStats& stats,
                 const Tensor& logits_detached, const ScaleSet& scale_set, bool log_form) {
    Tensor w_c = class_weights(stats, logits_detached, labels);
    const double tau = dynamic_temperature(stats);
    const std::vector<Tensor> projected = multiscale_project(x_bag, scale_set);

    Tensor acc;
    for (const auto& x_s : projected) {
        Tensor l = contrastive_loss_scale(similarity_matrix(x_s, tau), labels, w_c, log_form);
        acc = acc.defined() ? add(acc, l) : l;
    }
    return mul_scalar(acc, 1.0 / static_cast<double>(projected.size()));
}

Tensor cet_loss(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw ShapeError("cet_loss: expected [B x K] logits, got " + shape_str(logits.shape()));
    const int batch = logits.dim(0);
    const int k = logits.dim(1);
    if (static_cast<int>(labels.size()) != batch)
        throw ShapeError("cet_loss: label count does not match batch size");
    for (int b = 0; b < batch; ++b)
        if (labels[static_cast<std::size_t>(b)] < 0 || labels[static_cast<std::size_t>(b)] >= k)
            throw ConfigError("cet_loss: label " + std::to_string(labels[static_cast<std::size_t>(b)]) +
                              " outside [0, " + std::to_string(k) + ")");

    const auto& lv = logits.values();
    const std::vector<int> labs = labels;
    double loss = 0.0;
    for (int b = 0; b < batch; ++b) {
        const double* row = lv.data() + static_cast<std::size_t>(b * k);
        double mx = row[0];
        for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        loss += std::log(sum) + mx - row[labs[static_cast<std::size_t>(b)]];
    }
    loss /= batch;

    return Tensor::make_op({}, {loss}, {logits}, [batch, k, labs](detail::Node& self) {
        auto& p = self.parents[0];
        if (!p->requires_grad) return;
        auto& g = p->ensure_grad();
        const double upstream = self.grad[0];
        for (int b = 0; b < batch; ++b) {
            const double* row = p->value.data() + static_cast<std::size_t>(b * k);
            double mx = row[0];
            for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
            double sum = 0.0;
            for (int j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
            for (int j = 0; j < k; ++j) {
                const double soft = std::exp(row[j] - mx) / sum;
                const double onehot = j == labs[static_cast<std::size_t>(b)] ? 1.0 : 0.0;
                g[static_cast<std::size_t>(b * k + j)] += upstream * (soft - onehot) / batch;
            }
        }
    });
}

Tensor total_loss(const Tensor& l_mc, const Tensor& l_cet) { return add(l_mc, l_cet); }

}  // namespace micacl
