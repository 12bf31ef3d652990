#include "micacl/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "micacl/checkpoint.hpp"
#include "micacl/errors.hpp"
#include "micacl/mccl.hpp"
#include "micacl/optim.hpp"

namespace micacl {

namespace {

// run_seed sub-streams
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kInitStream = 2;
constexpr std::uint64_t kEpochStreamBase = 100;

Tensor gather_batch(const Dataset& ds, const std::vector<int>& global, std::vector<int>& labels) {
    const int b = static_cast<int>(global.size());
    const int per_bag = ds.instances * ds.feat_dim;
    std::vector<double> data(static_cast<std::size_t>(b * per_bag));
    labels.resize(global.size());
    for (int i = 0; i < b; ++i) {
        const Bag& bag = ds.bags[static_cast<std::size_t>(global[static_cast<std::size_t>(i)])];
        std::copy(bag.instances.begin(), bag.instances.end(),
                  data.begin() + static_cast<std::size_t>(i * per_bag));
        labels[static_cast<std::size_t>(i)] = bag.label;
    }
    return Tensor::from({b, ds.instances, ds.feat_dim}, std::move(data));
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("trainer: cannot open '" + path + "' for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace

std::string fmt_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("stratified_split: test fraction must lie in (0, 1)");
    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.classes));
    for (int i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.bags[static_cast<std::size_t>(i)].label)].push_back(i);

    Rng rng(Rng::mix(seed, kSplitStream));
    Split split;
    for (auto& members : by_class) {
        if (members.empty()) continue;
        if (members.size() == 1) {
            split.train.push_back(members[0]);  // too small to hold out
            continue;
        }
        rng.shuffle(members);
        const int n = static_cast<int>(members.size());
        const int n_test = std::max(1, static_cast<int>(std::llround(test_fraction * n)));
        for (int i = 0; i < n; ++i)
            (i < n_test ? split.test : split.train).push_back(members[static_cast<std::size_t>(i)]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

EvalLosses eval_losses(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds,
                       const std::vector<int>& indices, const ClassStats& stats) {
    constexpr int kChunk = 256;
    EvalLosses out;
    int counted = 0;
    for (std::size_t start = 0; start < indices.size(); start += kChunk) {
        const std::size_t end = std::min(indices.size(), start + kChunk);
        std::vector<int> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                               indices.begin() + static_cast<std::ptrdiff_t>(end));
        if (chunk.size() < 2) break;  // a trailing singleton cannot form pairs
        std::vector<int> labels;
        Tensor batch = gather_batch(ds, chunk, labels);
        const ModelOut fwd = forward_model(batch, params, cfg);
        const double cet = cet_loss(fwd.logits, labels).item();
        const double mc = mccl_loss(fwd.bag_embed, labels, stats, fwd.logits.detach(),
                                    params.scale_set, cfg.log_form)
                              .item();
        const int n = static_cast<int>(chunk.size());
        out.loss_cet += cet * n;
        out.loss_mc += mc * n;
        counted += n;
    }
    if (counted == 0) throw ConfigError("eval_losses: no evaluable chunk of size >= 2");
    out.loss_cet /= counted;
    out.loss_mc /= counted;
    out.loss_all = out.loss_mc + out.loss_cet;
    return out;
}

TrainResult train(const RunConfig& cfg, const Dataset& ds, const TrainOptions& opts) {
    cfg.model.validate();
    cfg.optim.validate();
    const ModelConfig& m = cfg.model;
    if (ds.classes != m.K || ds.instances != m.T || ds.feat_dim != m.C_in)
        throw ConfigError("train: dataset (K=" + std::to_string(ds.classes) + ", T=" +
                          std::to_string(ds.instances) + ", C_in=" + std::to_string(ds.feat_dim) +
                          ") does not match config (K=" + std::to_string(m.K) + ", T=" +
                          std::to_string(m.T) + ", C_in=" + std::to_string(m.C_in) + ")");

    const Split split = stratified_split(ds, 0.2, opts.run_seed);

    // dataset-level class statistics from the training split
    ClassStats stats;
    stats.tau0 = m.tau0;
    stats.counts.assign(static_cast<std::size_t>(m.K), 0);
    for (int idx : split.train) ++stats.counts[static_cast<std::size_t>(ds.bags[static_cast<std::size_t>(idx)].label)];
    for (int c = 0; c < m.K; ++c)
        if (stats.counts[static_cast<std::size_t>(c)] < 1)
            throw ConfigError("train: class " + std::to_string(c) +
                              " has no training samples; shrink K or enlarge the dataset");

    Rng init_rng(Rng::mix(opts.run_seed, kInitStream));
    TrainResult result;
    result.params = ModelParams::init(m, init_rng);
    result.stats = stats;
    auto params = result.params.named_parameters();
    OptimState opt_state = OptimState::init(params, cfg.optim);

    const int train_size = static_cast<int>(split.train.size());
    const int steps_per_epoch =
        static_cast<int>(make_batches(train_size, m.batch_size, Rng::mix(opts.run_seed, kEpochStreamBase)).size());
    if (steps_per_epoch == 0)
        throw ConfigError("train: training split too small for batch size " +
                          std::to_string(m.batch_size));
    const int total_steps = m.epochs * steps_per_epoch;

    int step = 0;
    for (int epoch = 1; epoch <= m.epochs; ++epoch) {
        const auto batches = make_batches(train_size, m.batch_size,
                                          Rng::mix(opts.run_seed, kEpochStreamBase + static_cast<std::uint64_t>(epoch)));
        EpochRow row;
        row.epoch = epoch;
        row.lr = cosine_lr(step, total_steps, cfg.optim.lr_max, cfg.optim.lr_min);
        for (const auto& batch : batches) {
            std::vector<int> global(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                global[i] = split.train[static_cast<std::size_t>(batch[i])];
            std::vector<int> labels;
            Tensor x = gather_batch(ds, global, labels);

            const ModelOut fwd = forward_model(x, result.params, m);
            Tensor l_cet = cet_loss(fwd.logits, labels);
            Tensor l_mc = mccl_loss(fwd.bag_embed, labels, stats, fwd.logits.detach(),
                                    result.params.scale_set, m.log_form);
            Tensor l_all = total_loss(l_mc, l_cet);
            Tensor selected = opts.loss_mode == LossMode::Full    ? l_all
                              : opts.loss_mode == LossMode::CetOnly ? l_cet
                                                                     : l_mc;
            if (!std::isfinite(selected.item()))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                   ", step " + std::to_string(step));

            for (auto& [name, p] : params) p.zero_grad();
            backward(selected);
            adamw_step(params, opt_state, cosine_lr(step, total_steps, cfg.optim.lr_max, cfg.optim.lr_min));
            ++step;

            row.loss_mc += l_mc.item();
            row.loss_cet += l_cet.item();
            row.loss_all += l_all.item();
            result.step_loss_mc.push_back(l_mc.item());
            result.step_loss_cet.push_back(l_cet.item());
            result.step_loss_all.push_back(l_all.item());
        }
        const int nb = static_cast<int>(batches.size());
        row.loss_mc /= nb;
        row.loss_cet /= nb;
        row.loss_all /= nb;
        const MetricsReport train_metrics = evaluate(result.params, m, ds, split.train);
        row.war = train_metrics.war;
        row.uar = train_metrics.uar;
        result.log.push_back(row);
    }

    result.test_report = split.test.empty() ? MetricsReport{}
                                            : evaluate(result.params, m, ds, split.test);

    if (!opts.out_dir.empty()) {
        std::filesystem::create_directories(opts.out_dir);
        const std::filesystem::path dir(opts.out_dir);
        write_text((dir / "train_log.csv").string(), metrics_csv(result.log));
        EpochRow test_row;
        if (!split.test.empty()) {
            const EvalLosses tl = eval_losses(result.params, m, ds, split.test, stats);
            test_row.loss_mc = tl.loss_mc;
            test_row.loss_cet = tl.loss_cet;
            test_row.loss_all = tl.loss_all;
            test_row.war = result.test_report.war;
            test_row.uar = result.test_report.uar;
        }
        write_text((dir / "test_metrics.csv").string(), report_csv(test_row));
        write_text((dir / "confusion.csv").string(), confusion_csv(result.test_report));
        write_checkpoint((dir / "checkpoint.mick").string(), m, result.params);
    }
    return result;
}

std::string metrics_csv(const std::vector<EpochRow>& rows) {
    std::string out = "epoch,lr,loss_mc,loss_cet,loss_all,war,uar\n";
    for (const auto& r : rows) {
        out += std::to_string(r.epoch);
        out += "," + fmt_double(r.lr) + "," + fmt_double(r.loss_mc) + "," + fmt_double(r.loss_cet) +
               "," + fmt_double(r.loss_all) + "," + fmt_double(r.war) + "," + fmt_double(r.uar) +
               "\n";
    }
    return out;
}

std::string report_csv(const EpochRow& row) { return metrics_csv({row}); }

std::string confusion_csv(const MetricsReport& report) {
    std::string out = "true_class";
    for (std::size_t j = 0; j < report.confusion.size(); ++j)
        out += ",pred_" + std::to_string(j);
    out += ",recall\n";
    for (std::size_t c = 0; c < report.confusion.size(); ++c) {
        out += std::to_string(c);
        for (int v : report.confusion[c]) out += "," + std::to_string(v);
        out += "," + fmt_double(report.per_class_recall[c]) + "\n";
    }
    return out;
}

}  // namespace micacl
