#pragma once

#include <string>

#include "micacl/config.hpp"
#include "micacl/model.hpp"

namespace micacl {

// MICK v1, little-endian: "MICK", u32 version, u32 num_arrays, then per array
// u32 name_len, name bytes, u32 ndim, u32 dims[ndim], float32 data. Model
// parameters are stored under their named_parameters() names; the model
// configuration rides along as "config.*" entries so a checkpoint is
// self-describing. Values narrow to float32 on write.
void write_checkpoint(const std::string& path, const ModelConfig& cfg, const ModelParams& params);

struct Checkpoint {
    ModelConfig config;
    ModelParams params;
};

Checkpoint read_checkpoint(const std::string& path);

}  // namespace micacl
