#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "micacl/config.hpp"
#include "micacl/databag.hpp"
#include "micacl/metrics.hpp"
#include "micacl/model.hpp"

namespace micacl {

enum class LossMode { Full, CetOnly, McclOnly };

struct TrainOptions {
    LossMode loss_mode = LossMode::Full;
    std::uint64_t run_seed = 1;
    // When non-empty, receives train_log.csv, test_metrics.csv, confusion.csv
    // and checkpoint.mick.
    std::string out_dir;
};

struct EpochRow {
    int epoch = 0;
    double lr = 0.0;        // schedule value at the first step of the epoch
    double loss_mc = 0.0;   // epoch means over batches
    double loss_cet = 0.0;
    double loss_all = 0.0;
    double war = 0.0;       // train-split metrics after the epoch
    double uar = 0.0;
};

struct Split {
    std::vector<int> train, test;
};

// Per-class 80/20 split (test_fraction of each class, at least one test
// sample for classes with >= 2 bags; singleton classes go to train).
Split stratified_split(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct TrainResult {
    std::vector<EpochRow> log;
    MetricsReport test_report;
    ModelParams params;
    ClassStats stats;  // train-split statistics the run used
    // per-optimizer-step loss values, for step-level comparisons
    std::vector<double> step_loss_mc, step_loss_cet, step_loss_all;
};

TrainResult train(const RunConfig& cfg, const Dataset& ds, const TrainOptions& opts);

// The documented 7-column log: epoch,lr,loss_mc,loss_cet,loss_all,war,uar.
// Doubles use shortest round-trip formatting, so equal runs give equal bytes.
std::string metrics_csv(const std::vector<EpochRow>& rows);

// Single-row variant of the same schema used for held-out/eval reports
// (epoch and lr are 0 there).
std::string report_csv(const EpochRow& row);
std::string confusion_csv(const MetricsReport& report);

// Dataset-wide loss means computed in fixed chunks (contrastive terms need
// every class present in `indices`' label set statistics).
struct EvalLosses {
    double loss_mc = 0.0, loss_cet = 0.0, loss_all = 0.0;
};
EvalLosses eval_losses(const ModelParams& params, const ModelConfig& cfg, const Dataset& ds,
                       const std::vector<int>& indices, const ClassStats& stats);

std::string fmt_double(double v);

}  // namespace micacl
