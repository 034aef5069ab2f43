#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dmfuse/fusionnet.hpp"
#include "dmfuse/reconstructor.hpp"
#include "dmfuse/schedule.hpp"

namespace dmfuse {

/// Every knob of the pipeline; serialized as `key = value` sections.
/// Defaults are the desk-scale configuration (64x64, base width 16);
/// paper-scale values stay reachable through the config file.
struct FusionConfig {
    // [data]
    std::string data_root = "data";
    int resolution = 64;
    int train_pairs_per_task = 30;
    int test_pairs_per_task = 10;

    // [schedule]
    int schedule_T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    // [fusion]
    std::vector<int> time_steps = {5, 10, 20};

    // [loss]
    double alpha = 1.5;
    double beta = 0.5;
    int patch_size = 16;
    int patch_stride = 16;

    // [model]
    int base_width = 16;
    std::array<int, 5> channel_multipliers = {1, 2, 2, 4, 4};
    int time_embed_dim = 64;
    int shuffle_groups = 4;
    int ca_reduction = 4;

    // [train]
    int stage1_steps = 2000;
    int stage2_steps = 1000;
    double stage1_lr = 1e-4;
    double stage2_lr = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;

    // [ablate] - reduced budgets for the ablation harness
    int ablate_stage1_steps = 300;
    int ablate_stage2_steps = 150;
    int ablate_pairs_per_task = 2;

    // [seeds]
    uint64_t seed = 42;

    void validate() const;

    ReconArch recon_arch() const;
    NoiseSchedule make_schedule() const;
    TimeStepSet step_set() const;
    FusionArch fusion_arch() const;

    /// Canonical text form; parse(serialize()) is the identity.
    std::string serialize() const;
    static FusionConfig parse(const std::string& text);
    static FusionConfig load(const std::string& path);
    void save(const std::string& path) const;

    /// Digest of the canonical serialization (whole config).
    std::string digest() const;
    /// Digest of the fields that fix the reconstructor architecture.
    std::string recon_arch_digest() const;
    /// Digest of the fields that fix the fusion architecture (includes the
    /// reconstructor digest and the step count).
    std::string fusion_arch_digest() const;

    bool operator==(const FusionConfig&) const = default;
};

}  // namespace dmfuse
