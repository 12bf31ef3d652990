// micacl command-line front end: synthetic data generation, training,
// evaluation and gradient verification.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include "micacl/checkpoint.hpp"
#include "micacl/databag.hpp"
#include "micacl/gradcheck_suite.hpp"
#include "micacl/metrics.hpp"
#include "micacl/trainer.hpp"

using namespace micacl;

namespace {

int cmd_gen_data(const std::string& out, const DatasetSpec& spec) {
    const Dataset ds = gen_dataset(spec);
    write_dataset(ds, out);
    std::printf("wrote %d bags (K=%d, T=%d, C_in=%d) to %s\n", ds.size(), ds.classes,
                ds.instances, ds.feat_dim, out.c_str());
    std::printf("class counts:");
    for (int c : class_counts(ds)) std::printf(" %d", c);
    std::printf("\n");
    return 0;
}

int cmd_train(const std::string& data, const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed, const std::string& loss, bool log_form) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
    if (log_form) cfg.model.log_form = true;

    TrainOptions opts;
    opts.run_seed = seed;
    opts.out_dir = out_dir;
    if (loss == "full")
        opts.loss_mode = LossMode::Full;
    else if (loss == "cet-only")
        opts.loss_mode = LossMode::CetOnly;
    else if (loss == "mccl-only")
        opts.loss_mode = LossMode::McclOnly;
    else
        throw ConfigError("train: unknown loss mode '" + loss + "'");

    const Dataset ds = read_dataset(data);
    const TrainResult result = train(cfg, ds, opts);

    const EpochRow& last = result.log.back();
    std::printf("trained %d epochs; final train loss_all %.6f, train WAR %.4f, train UAR %.4f\n",
                last.epoch, last.loss_all, last.war, last.uar);
    std::printf("held-out WAR %.4f, UAR %.4f\n", result.test_report.war, result.test_report.uar);
    std::printf("artifacts in %s\n", out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& data, const std::string& checkpoint, const std::string& out) {
    const Checkpoint ck = read_checkpoint(checkpoint);
    const Dataset ds = read_dataset(data);
    const MetricsReport report = evaluate(ck.params, ck.config, ds);

    std::vector<int> all(static_cast<std::size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) all[static_cast<std::size_t>(i)] = i;
    ClassStats stats;
    stats.tau0 = ck.config.tau0;
    stats.counts = class_counts(ds);
    stats.validate();
    const EvalLosses losses = eval_losses(ck.params, ck.config, ds, all, stats);

    EpochRow row;
    row.loss_mc = losses.loss_mc;
    row.loss_cet = losses.loss_cet;
    row.loss_all = losses.loss_all;
    row.war = report.war;
    row.uar = report.uar;
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("eval: cannot open '" + out + "' for writing");
    const std::string csv = report_csv(row);
    f.write(csv.data(), static_cast<std::streamsize>(csv.size()));

    std::printf("WAR %.4f, UAR %.4f over %d bags\n", report.war, report.uar, ds.size());
    for (std::size_t c = 0; c < report.per_class_recall.size(); ++c)
        std::printf("  class %zu recall %.4f\n", c, report.per_class_recall[c]);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_gradcheck(const std::string& module, double eps) {
    const auto results = run_gradcheck(module, eps);
    bool ok = true;
    for (const auto& r : results) {
        std::printf("%-8s max relative error %.3e\n", r.module.c_str(), r.max_rel_err);
        ok = ok && r.max_rel_err < 1e-4;
    }
    std::printf("gradcheck: %s\n", ok ? "OK" : "FAILED (threshold 1e-4)");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MICACL: graph-interacting multi-instance model with "
                 "category-aware multiscale contrastive training"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic long-tailed dataset");
    std::string gen_out;
    DatasetSpec spec;
    gen->add_option("--out", gen_out, "output .mibg path")->required();
    gen->add_option("--classes", spec.classes, "number of classes K");
    gen->add_option("--bags-head", spec.head_count, "bags in the largest class");
    gen->add_option("--ratio", spec.imbalance_ratio, "head/tail imbalance ratio");
    gen->add_option("--instances", spec.instances, "instances per bag T");
    gen->add_option("--feat-dim", spec.feat_dim, "raw feature width C_in");
    gen->add_option("--key-instances", spec.key_instances, "instances carrying class evidence");
    gen->add_option("--noise", spec.noise_sigma, "feature noise sigma");
    gen->add_option("--seed", spec.seed, "64-bit generator seed");

    // train
    auto* tr = app.add_subcommand("train", "train on a .mibg dataset");
    std::string tr_data, tr_config, tr_out_dir = "run";
    std::uint64_t tr_seed = 1;
    std::string tr_loss = "full";
    bool tr_log_form = false;
    tr->add_option("--data", tr_data, "input .mibg path")->required();
    tr->add_option("--config", tr_config, "key=value config file");
    tr->add_option("--out-dir", tr_out_dir, "output directory");
    tr->add_option("--seed", tr_seed, "64-bit run seed");
    tr->add_option("--loss", tr_loss, "loss mode")
        ->check(CLI::IsMember({"full", "cet-only", "mccl-only"}));
    tr->add_flag("--log-form", tr_log_form, "use the -log(ratio) contrastive form");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a .mibg dataset");
    std::string ev_data, ev_ckpt, ev_out = "metrics.csv";
    ev->add_option("--data", ev_data, "input .mibg path")->required();
    ev->add_option("--checkpoint", ev_ckpt, "input .mick checkpoint")->required();
    ev->add_option("--out", ev_out, "output metrics CSV");

    // gradcheck
    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::string gc_module = "all";
    double gc_eps = 1e-5;
    gc->add_option("--module", gc_module, "module to check")
        ->check(CLI::IsMember({"geiim", "wian", "mccl", "all"}));
    gc->add_option("--eps", gc_eps, "central-difference step");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(gen_out, spec);
        if (tr->parsed()) return cmd_train(tr_data, tr_config, tr_out_dir, tr_seed, tr_loss, tr_log_form);
        if (ev->parsed()) return cmd_eval(ev_data, ev_ckpt, ev_out);
        if (gc->parsed()) return cmd_gradcheck(gc_module, gc_eps);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
