#pragma once

#include <string>
#include <vector>

#include "dmfuse/checkpoint.hpp"
#include "dmfuse/config.hpp"
#include "dmfuse/data.hpp"
#include "dmfuse/metrics.hpp"

namespace dmfuse::pipeline {

/// Record of one CLI run: config digest, seeds, timestamps and the digest
/// of every emitted artifact. Written as manifest.json in the out dir.
struct RunManifest {
    std::string command;
    std::string code_version;
    std::string config_digest;
    uint64_t seed = 0;
    std::string started, finished;
    std::vector<std::pair<std::string, std::string>> artifacts;  // (path, sha256)

    static RunManifest begin(const std::string& command, const FusionConfig& config);
    void add_artifact(const std::string& path);
    void finish_and_write(const std::string& out_dir);
};

/// Stable 64-bit hash of a string (sha256 prefix); used to derive
/// per-artifact seeds from the master seed.
uint64_t stable_hash64(const std::string& s);

/// DMFUSE_THREADS caps parallel pair evaluation; defaults to the hardware
/// count (at most 4).
int thread_cap();

/// Generates the three phantom task datasets (train/test splits) plus the
/// pair manifest.
void cmd_phantom(const FusionConfig& config, const std::string& out_dir);

/// Stage I training over every modality's luma channel in the train split.
void cmd_train_recon(const FusionConfig& config, const std::string& out_dir);

/// Stage II training over the frozen reconstructor; one parameter set for
/// all three tasks.
void cmd_train_fusion(const FusionConfig& config, const std::string& recon_ckpt, const std::string& out_dir);

/// Fuses every pair of a split; color tasks fuse luma and reattach the
/// functional image's chroma.
void cmd_fuse(const FusionConfig& config, const std::string& recon_ckpt, const std::string& fusion_ckpt,
              const std::string& manifest_path, const std::string& split, const std::string& out_dir);

/// Scores fused outputs against their source pairs; per-task CSVs plus a
/// formatted table in the paper's metric order.
void cmd_eval(const FusionConfig& config, const std::string& fused_dir, const std::string& manifest_path,
              const std::string& split, const std::string& out_dir);

enum class AblateMode { LossWeights, TimeSteps, NoDiffusion, NoAmff, NoMsff };
AblateMode ablate_mode_from_name(const std::string& name);
std::vector<std::string> ablate_mode_names();

/// Self-contained ablation run: generates a small dataset, trains the
/// variants of the chosen protocol and emits the comparison table.
void cmd_ablate(const FusionConfig& config, AblateMode mode, const std::string& out_dir);

}  // namespace dmfuse::pipeline
