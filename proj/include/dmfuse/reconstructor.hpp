#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dmfuse/image.hpp"
#include "dmfuse/nn.hpp"
#include "dmfuse/schedule.hpp"

namespace dmfuse {

/// Architecture knobs of the denoising network. Multipliers are listed
/// finest-to-coarsest; pyramid level i (1 = coarsest) then has
/// base_width * mult[5-i] channels at spatial size resolution / 2^(5-i).
struct ReconArch {
    int resolution = 64;
    int base_width = 16;
    std::array<int, 5> mult = {1, 2, 2, 4, 4};
    int time_embed_dim = 64;

    void validate() const;
    /// Channels of pyramid level 1..5 (coarsest to finest).
    int level_channels(int level) const;
    /// Spatial size of pyramid level 1..5.
    int level_size(int level) const;

    bool operator==(const ReconArch&) const = default;
};

/// Five decoder-side activation stacks, levels[0] the coarsest.
struct FeaturePyramid {
    std::array<Tensor, 5> levels;

    const Tensor& level(int i) const { return levels.at(i - 1); }  // 1-based
};

/// Stage I denoising network: predicts the previous-step image from a
/// noised input and exposes the five decoder taps consumed by the fusion
/// network. Encoder/decoder with skip connections, GroupNorm + SiLU
/// blocks and a sinusoidal time embedding added per block.
class Reconstructor {
public:
    Reconstructor(const ReconArch& arch, uint64_t seed);

    const ReconArch& arch() const { return arch_; }
    uint64_t seed() const { return seed_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    struct ForwardResult {
        nn::Value pred;                    // (1,H,W)
        std::array<nn::Value, 5> taps;     // [0] coarsest
    };
    /// Single pass producing both the prediction and the taps.
    ForwardResult forward(const nn::Value& noisy, int t, bool trainable) const;

    RawField predict_previous(const RawField& noisy, int t) const;
    FeaturePyramid extract_features(const RawField& noisy, int t) const;

private:
    struct ResBlock {
        nn::GroupNorm gn1, gn2;
        nn::Conv2d conv1, conv2;
        nn::Linear time_proj;
        nn::Conv2d skip;
        bool reshape = false;
        nn::Value operator()(const nn::Value& x, const nn::Value& emb, bool trainable) const;
    };
    struct Ladder {
        nn::Conv2d stem;
        std::array<ResBlock, 5> enc;   // finest to coarsest
        std::array<nn::Conv2d, 4> down;
        std::array<ResBlock, 5> dec;   // coarsest to finest
        std::array<nn::Conv2d, 4> up_conv;
        nn::GroupNorm out_norm;
        nn::Conv2d out_conv;
        nn::Linear emb1, emb2;
    };

    ResBlock make_block(SplitMix64& rng, const std::string& name, int cin, int cout);
    nn::Value embed(int t, bool trainable) const;

    ReconArch arch_;
    uint64_t seed_;
    nn::ParamStore params_;
    Ladder net_;
};

/// Stage I training options; the loss is the mean absolute error between
/// the prediction and the coupled previous-step image.
struct Stage1Options {
    int steps = 2000;
    double learning_rate = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    uint64_t seed = 0;
    bool use_diffusion = true;  // false: plain reconstruction (ablation)
};

/// Runs Stage I over single-channel images (functional modalities enter as
/// luma). Returns the per-step loss curve; weights train in place.
std::vector<double> train_stage1(Reconstructor& net, const std::vector<GrayImage>& dataset,
                                 const NoiseSchedule& schedule, const Stage1Options& opt);

}  // namespace dmfuse
