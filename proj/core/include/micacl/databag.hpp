#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "micacl/rng.hpp"

namespace micacl {

// One labeled multi-instance sample: T instances of C_in features each.
struct Bag {
    std::vector<double> instances;  // row-major T x C_in
    int label = 0;
};

struct Dataset {
    int classes = 0;   // K
    int instances = 0; // T
    int feat_dim = 0;  // C_in
    std::vector<Bag> bags;

    int size() const { return static_cast<int>(bags.size()); }
};

// Recipe for a synthetic long-tailed multi-instance dataset. Class c receives
// round(head_count * ratio^(-c / (K-1))) bags (an exponential tail). Each bag
// plants its class prototype (plus noise) into `key_instances` uniformly
// chosen slots; every other slot is pure noise, so only the key instances
// carry label information.
struct DatasetSpec {
    int classes = 7;
    int instances = 16;
    int feat_dim = 12;
    int head_count = 64;
    double imbalance_ratio = 16.0;
    int key_instances = 6;
    double noise_sigma = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
    std::vector<int> class_count_profile() const;
};

// Deterministic in `spec.seed`: prototypes are drawn first (unit-norm, one per
// class), then bags class by class.
Dataset gen_dataset(const DatasetSpec& spec);

// Exact label histogram, length K.
std::vector<int> class_counts(const Dataset& ds);

// MIBG v1, little-endian: "MIBG", u32 version, u32 num_bags, u32 K, u32 T,
// u32 C_in, then per bag a u32 label and T*C_in float32 features. Working
// doubles are narrowed to float32 on write and widened back on read.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

// Seeded shuffle of [0, n) chopped into batches; a trailing batch smaller
// than 2 is dropped (the contrastive loss needs pairs).
std::vector<std::vector<int>> make_batches(int dataset_size, int batch_size,
                                           std::uint64_t epoch_seed);

}  // namespace micacl
