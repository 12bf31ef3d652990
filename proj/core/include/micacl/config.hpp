#pragma once

#include <string>
#include <vector>

namespace micacl {

// Model-side configuration. Field names double as the keys of the flat
// key=value config file; unknown keys are rejected.
struct ModelConfig {
    int C_in = 12;           // raw per-instance feature width
    int C = 16;              // interaction module channel width
    int d = 8;               // node embedding width
    int C_h = 16;            // recurrent hidden width
    int E = 8;               // shared contrastive embedding width
    int n_heads = 4;
    int K = 7;               // classes
    int T = 16;              // instances per bag
    std::vector<int> scales; // pooling scales; empty -> {1, C_h/2, C_h}
    double tau0 = 0.1;
    bool log_form = false;
    int encoder_hidden = 16;
    int epochs = 50;
    int batch_size = 16;

    // test hooks: pin the interaction mix to the identity, the instance
    // weights to uniform and the dynamic gate to 1 (plain-LSTM reduction)
    bool force_alpha_one = false;
    bool force_uniform_weights = false;
    bool force_unit_gate = false;

    std::vector<int> effective_scales() const;
    void validate() const;
};

struct OptimConfig {
    double lr_max = 4e-4;
    double lr_min = 3e-6;
    double weight_decay = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct RunConfig {
    ModelConfig model;
    OptimConfig optim;
};

// Flat key=value text; '#' starts a comment, blank lines are skipped.
// Unknown keys throw ConfigError. `scales` is a comma-separated int list;
// booleans accept 0/1/true/false.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string config_to_text(const RunConfig& cfg);

}  // namespace micacl
