#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dmfuse/losses.hpp"
#include "dmfuse/reconstructor.hpp"

namespace dmfuse {

/// Architecture of the fusion network. Channel widths per pyramid level
/// mirror the reconstructor so the multiscale ladder stays shape
/// compatible without extra projections.
struct FusionArch {
    std::array<int, 5> channels = {64, 64, 32, 32, 16};  // level 1..5, coarse to fine
    int n_steps = 3;                                     // |TimeStepSet|
    int shuffle_groups = 4;
    int ca_reduction = 4;
    int sa_kernel = 7;
    bool use_amff = true;  // false: fuse modalities by elementwise addition
    bool use_msff = true;  // false: feed only the finest level to the head

    static FusionArch from_recon(const ReconArch& recon, int n_steps);
    void validate() const;

    bool operator==(const FusionArch&) const = default;
};

/// Group-transpose channel permutation on a plain stack (values unchanged
/// as a multiset per spatial site).
Tensor channel_shuffle(const Tensor& x, int groups);

/// Stage II network: per-modality fusion of features across noise steps,
/// attention-guided multimodal fusion, multiscale fusion, fusion head.
class FusionNet {
public:
    FusionNet(const FusionArch& arch, uint64_t seed);

    const FusionArch& arch() const { return arch_; }
    uint64_t seed() const { return seed_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    /// phi3(phi1([H_{t1},...,| H_{tn}])) for one modality (0 = A, 1 = B)
    /// at one pyramid level (1..5).
    nn::Value fuse_noisy_features(int modality, int level, const std::vector<nn::Value>& feats,
                                  bool trainable) const;

    /// Attention-guided multimodal fusion at one level. probe_gates_one
    /// replaces every attention map with ones, exposing the pure
    /// convolutional path.
    nn::Value amff(int level, const nn::Value& fa, const nn::Value& fb, bool trainable,
                   bool probe_gates_one = false) const;

    /// Coarse-to-fine ladder producing the full-resolution fused stack.
    nn::Value msff(const std::array<nn::Value, 5>& f, bool trainable) const;

    /// Two 3x3 convolutions down to one channel, sigmoid-bounded.
    nn::Value fusion_head(const nn::Value& m5, bool trainable) const;

    /// Full path from per-(modality, step) pyramids to the fused image.
    /// pyramids[m][s] is the pyramid of modality m at step index s.
    nn::Value forward(const std::array<std::vector<std::array<nn::Value, 5>>, 2>& pyramids, bool trainable) const;

private:
    struct ScaleBlocks {
        nn::Conv2d phi1_a, phi3_a, phi1_b, phi3_b;
        // AMFF
        nn::Conv2d sa, ca1, ca2, gconv, pa, proj;
        nn::Parameter* lam_sa = nullptr;
        nn::Parameter* lam_ca = nullptr;
    };
    nn::Value attention_weight(int level, const nn::Value& f, bool trainable) const;

    FusionArch arch_;
    uint64_t seed_;
    nn::ParamStore params_;
    std::array<ScaleBlocks, 5> scales_;
    std::array<nn::Conv2d, 5> msff_main_;
    std::array<nn::Conv2d, 3> msff_inner_;
    nn::Conv2d head1_, head2_;
};

/// Deterministic noise source for fusion inference; the seed is recorded
/// in the run manifest.
struct NoisePolicy {
    uint64_t seed = 0;
};

/// End-to-end fusion of one pair over frozen reconstructor features.
GrayImage forward_fuse(const Reconstructor& recon, const FusionNet& fusion, const GrayImage& ia,
                       const GrayImage& ib_luma, const TimeStepSet& steps, const NoiseSchedule& schedule,
                       const NoisePolicy& noise);

struct TrainPair {
    GrayImage a;
    GrayImage b_luma;
};

struct Stage2Options {
    int steps = 1000;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    uint64_t seed = 0;
    double alpha = 1.5;
    double beta = 0.5;
    double grad_weight = 1.0;
    int patch_size = 16;
    int patch_stride = 16;
};

/// Trains the fusion network over a frozen reconstructor; per-sample noise
/// is drawn fresh each iteration. Returns per-step loss breakdowns.
std::vector<losses::LossBreakdown> train_stage2(const Reconstructor& recon, FusionNet& fusion,
                                                const std::vector<TrainPair>& pairs, const TimeStepSet& steps,
                                                const NoiseSchedule& schedule, const Stage2Options& opt);

}  // namespace dmfuse
