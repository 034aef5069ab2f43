#include "dmfuse/fusionnet.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmfuse {

namespace ops = dmfuse::ad;
using nn::Value;

FusionArch FusionArch::from_recon(const ReconArch& recon, int n_steps) {
    FusionArch a;
    for (int level = 1; level <= 5; ++level) a.channels[level - 1] = recon.level_channels(level);
    a.n_steps = n_steps;
    return a;
}

void FusionArch::validate() const {
    if (n_steps < 1) throw std::invalid_argument("FusionArch: need at least one time step");
    for (int c : channels)
        if (c <= 0) throw std::invalid_argument("FusionArch: non-positive channel width");
    if (shuffle_groups < 1) throw std::invalid_argument("FusionArch: bad shuffle group count");
    for (int c : channels)
        if ((2 * c) % shuffle_groups != 0)
            throw std::invalid_argument("FusionArch: shuffle groups must divide concatenated width");
}

Tensor channel_shuffle(const Tensor& x, int groups) {
    if (groups <= 0 || x.c % groups != 0) throw std::invalid_argument("channel_shuffle: channels not divisible by groups");
    Tensor out(x.c, x.h, x.w);
    const int per = x.c / groups;
    for (int g = 0; g < groups; ++g)
        for (int j = 0; j < per; ++j) {
            const double* src = x.chan(g * per + j);
            std::copy(src, src + x.plane(), out.chan(j * groups + g));
        }
    return out;
}

FusionNet::FusionNet(const FusionArch& arch, uint64_t seed) : arch_(arch), seed_(seed) {
    arch_.validate();
    SplitMix64 rng(SplitMix64::derive(seed, 0xf05e));
    // Xavier throughout the conv-only chains: the decoder taps enter
    // unnormalized, so any variance gain per layer compounds into sigmoid
    // saturation at the head.
    for (int i = 0; i < 5; ++i) {
        const int c = arch_.channels[i];
        const std::string tag = "s" + std::to_string(i + 1);
        ScaleBlocks& s = scales_[i];
        s.phi1_a = nn::Conv2d::make(params_, rng, tag + ".a.phi1", arch_.n_steps * c, c, 1, 1, 1, nn::Init::Xavier);
        s.phi3_a = nn::Conv2d::make(params_, rng, tag + ".a.phi3", c, c, 3, 1, 1, nn::Init::Xavier);
        s.phi1_b = nn::Conv2d::make(params_, rng, tag + ".b.phi1", arch_.n_steps * c, c, 1, 1, 1, nn::Init::Xavier);
        s.phi3_b = nn::Conv2d::make(params_, rng, tag + ".b.phi3", c, c, 3, 1, 1, nn::Init::Xavier);
        if (arch_.use_amff) {
            const int cr = std::max(1, c / arch_.ca_reduction);
            s.sa = nn::Conv2d::make(params_, rng, tag + ".amff.sa", 2, 1, arch_.sa_kernel, 1, 1, nn::Init::Xavier);
            s.ca1 = nn::Conv2d::make(params_, rng, tag + ".amff.ca1", c, cr, 1);
            s.ca2 = nn::Conv2d::make(params_, rng, tag + ".amff.ca2", cr, c, 1, 1, 1, nn::Init::Xavier);
            s.lam_sa = params_.create(tag + ".amff.lam_sa", 1, 1, 1);
            s.lam_sa->value.v[0] = 0.5;
            s.lam_ca = params_.create(tag + ".amff.lam_ca", 1, 1, 1);
            s.lam_ca->value.v[0] = 0.5;
            s.gconv = nn::Conv2d::make(params_, rng, tag + ".amff.gconv", 2 * c, 2 * c, 3, 1, arch_.shuffle_groups,
                                       nn::Init::Xavier);
            s.pa = nn::Conv2d::make(params_, rng, tag + ".amff.pa", 2 * c, 2 * c, 1, 1, 1, nn::Init::Xavier);
            s.proj = nn::Conv2d::make(params_, rng, tag + ".amff.proj", 2 * c, c, 1, 1, 1, nn::Init::Xavier);
        }
    }
    if (arch_.use_msff) {
        // main conv at stage i maps the stage sum onto the next level's width
        // (the last stage keeps the finest width); inner convs carry M^{i-2}
        // up to the width of the stage-i sum.
        const auto next_c = [&](int i) { return arch_.channels[std::min(i + 1, 4)]; };
        for (int i = 0; i < 5; ++i)
            msff_main_[i] = nn::Conv2d::make(params_, rng, "msff.main" + std::to_string(i + 1), arch_.channels[i],
                                             next_c(i), 3, 1, 1, nn::Init::Xavier);
        for (int i = 2; i < 5; ++i)
            msff_inner_[i - 2] = nn::Conv2d::make(params_, rng, "msff.inner" + std::to_string(i + 1),
                                                  arch_.channels[i - 1], arch_.channels[i], 3, 1, 1, nn::Init::Xavier);
    }
    const int c5 = arch_.channels[4];
    head1_ = nn::Conv2d::make(params_, rng, "head.conv1", c5, c5, 3);
    head2_ = nn::Conv2d::make(params_, rng, "head.conv2", c5, 1, 3, 1, 1, nn::Init::Zero);
}

Value FusionNet::fuse_noisy_features(int modality, int level, const std::vector<Value>& feats, bool trainable) const {
    if (modality != 0 && modality != 1) throw std::invalid_argument("fuse_noisy_features: modality must be 0 or 1");
    if (level < 1 || level > 5) throw std::invalid_argument("fuse_noisy_features: level out of range");
    if (static_cast<int>(feats.size()) != arch_.n_steps)
        throw std::invalid_argument("fuse_noisy_features: expected one pyramid per time step");
    const int c = arch_.channels[level - 1];
    for (const auto& f : feats)
        if (f->val.c != c || !f->val.same_shape(feats[0]->val))
            throw std::invalid_argument("fuse_noisy_features: pyramid shape mismatch");
    const ScaleBlocks& s = scales_[level - 1];
    Value x = feats.size() == 1 ? feats[0] : ops::concat(feats);
    if (modality == 0) return s.phi3_a(s.phi1_a(x, trainable), trainable);
    return s.phi3_b(s.phi1_b(x, trainable), trainable);
}

Value FusionNet::attention_weight(int level, const Value& f, bool trainable) const {
    const ScaleBlocks& s = scales_[level - 1];
    Value sa_map = ops::sigmoid(s.sa(ops::concat({ops::channel_mean(f), ops::channel_max(f)}), trainable));
    Value ca_vec = ops::sigmoid(s.ca2(ops::silu(s.ca1(ops::global_avg_pool(f), trainable)), trainable));
    Value sa_full = ops::expand_spatial(sa_map, f->val.c);
    Value ca_full = ops::expand_chan(ca_vec, f->val.h, f->val.w);
    return ops::add(ops::mul_scalar_node(sa_full, ops::leaf(*s.lam_sa, trainable)),
                    ops::mul_scalar_node(ca_full, ops::leaf(*s.lam_ca, trainable)));
}

Value FusionNet::amff(int level, const Value& fa, const Value& fb, bool trainable, bool probe_gates_one) const {
    if (!arch_.use_amff) throw std::logic_error("amff: disabled in this architecture");
    if (level < 1 || level > 5) throw std::invalid_argument("amff: level out of range");
    if (!fa->val.same_shape(fb->val)) throw std::invalid_argument("amff: shape mismatch");
    const ScaleBlocks& s = scales_[level - 1];
    Value wa = probe_gates_one ? fa : ops::mul(fa, attention_weight(level, fa, trainable));
    Value wb = probe_gates_one ? fb : ops::mul(fb, attention_weight(level, fb, trainable));
    Value z = s.gconv(ops::channel_shuffle(ops::concat({wa, wb}), arch_.shuffle_groups), trainable);
    Value gated = probe_gates_one ? z : ops::mul(z, ops::sigmoid(s.pa(z, trainable)));
    return s.proj(gated, trainable);
}

Value FusionNet::msff(const std::array<Value, 5>& f, bool trainable) const {
    if (!arch_.use_msff) throw std::logic_error("msff: disabled in this architecture");
    for (int i = 0; i < 5; ++i) {
        if (f[i]->val.c != arch_.channels[i]) throw std::invalid_argument("msff: channel mismatch at level " + std::to_string(i + 1));
        if (i > 0 && (f[i]->val.h != 2 * f[i - 1]->val.h || f[i]->val.w != 2 * f[i - 1]->val.w))
            throw std::invalid_argument("msff: ladder size mismatch at level " + std::to_string(i + 1));
    }
    std::array<Value, 5> m;
    m[0] = ops::upsample_bilinear2(msff_main_[0](f[0], trainable));
    m[1] = ops::upsample_bilinear2(msff_main_[1](ops::add(m[0], f[1]), trainable));
    for (int i = 2; i < 5; ++i) {
        Value carried = ops::upsample_bilinear2(msff_inner_[i - 2](m[i - 2], trainable));
        Value mixed = msff_main_[i](ops::add(ops::add(m[i - 1], f[i]), carried), trainable);
        m[i] = i == 4 ? mixed : ops::upsample_bilinear2(mixed);  // level 5 is already full resolution
    }
    return m[4];
}

Value FusionNet::fusion_head(const Value& m5, bool trainable) const {
    return ops::sigmoid(head2_(ops::silu(head1_(m5, trainable)), trainable));
}

Value FusionNet::forward(const std::array<std::vector<std::array<Value, 5>>, 2>& pyramids, bool trainable) const {
    for (int mo = 0; mo < 2; ++mo)
        if (static_cast<int>(pyramids[mo].size()) != arch_.n_steps)
            throw std::invalid_argument("FusionNet::forward: pyramid count mismatch");
    std::array<Value, 5> fused_levels;
    for (int level = 1; level <= 5; ++level) {
        std::vector<Value> feats_a, feats_b;
        for (int sidx = 0; sidx < arch_.n_steps; ++sidx) {
            feats_a.push_back(pyramids[0][sidx][level - 1]);
            feats_b.push_back(pyramids[1][sidx][level - 1]);
        }
        Value fa = fuse_noisy_features(0, level, feats_a, trainable);
        Value fb = fuse_noisy_features(1, level, feats_b, trainable);
        fused_levels[level - 1] = arch_.use_amff ? amff(level, fa, fb, trainable) : ops::add(fa, fb);
    }
    Value m5 = arch_.use_msff ? msff(fused_levels, trainable) : fused_levels[4];
    return fusion_head(m5, trainable);
}

namespace {

std::array<Value, 5> frozen_pyramid(const Reconstructor& recon, const RawField& input, int t) {
    auto fwd = recon.forward(ops::constant(input.to_tensor()), t, /*trainable=*/false);
    std::array<Value, 5> taps;
    for (int i = 0; i < 5; ++i) taps[i] = ops::detach(fwd.taps[i]);
    return taps;
}

std::array<std::vector<std::array<Value, 5>>, 2> noisy_pyramids(const Reconstructor& recon, const GrayImage& ia,
                                                                const GrayImage& ib_luma, const TimeStepSet& steps,
                                                                const NoiseSchedule& schedule, SplitMix64& rng) {
    std::array<std::vector<std::array<Value, 5>>, 2> pyr;
    const int h = ia.height(), w = ia.width();
    for (int t : steps.steps) {
        RawField na(h, w), nb(h, w);
        for (double& x : na.v) x = rng.next_normal();
        for (double& x : nb.v) x = rng.next_normal();
        pyr[0].push_back(frozen_pyramid(recon, forward_jump(ia, t, schedule, na), t));
        pyr[1].push_back(frozen_pyramid(recon, forward_jump(ib_luma, t, schedule, nb), t));
    }
    return pyr;
}

}  // namespace

GrayImage forward_fuse(const Reconstructor& recon, const FusionNet& fusion, const GrayImage& ia,
                       const GrayImage& ib_luma, const TimeStepSet& steps, const NoiseSchedule& schedule,
                       const NoisePolicy& noise) {
    if (ia.height() != ib_luma.height() || ia.width() != ib_luma.width())
        throw std::invalid_argument("forward_fuse: resolution mismatch between sources");
    if (ia.height() != recon.arch().resolution)
        throw std::invalid_argument("forward_fuse: inputs do not match configured resolution");
    steps.validate_against(schedule);
    SplitMix64 rng(SplitMix64::derive(noise.seed, 0x1f5e));
    auto pyr = noisy_pyramids(recon, ia, ib_luma, steps, schedule, rng);
    Value fused = fusion.forward(pyr, /*trainable=*/false);
    return GrayImage(RawField::from_tensor(fused->val));
}

std::vector<losses::LossBreakdown> train_stage2(const Reconstructor& recon, FusionNet& fusion,
                                                const std::vector<TrainPair>& pairs, const TimeStepSet& steps,
                                                const NoiseSchedule& schedule, const Stage2Options& opt) {
    if (pairs.empty()) throw std::invalid_argument("train_stage2: empty pair list");
    steps.validate_against(schedule);
    const int res = recon.arch().resolution;
    for (const auto& p : pairs)
        if (p.a.height() != res || p.a.width() != res || p.b_luma.height() != res || p.b_luma.width() != res)
            throw std::invalid_argument("train_stage2: pair does not match configured resolution");

    nn::Adam adam(fusion.params(), opt.learning_rate, opt.adam_beta1, opt.adam_beta2);
    SplitMix64 rng(SplitMix64::derive(opt.seed, 0x57a6e2));
    std::vector<losses::LossBreakdown> curve;
    curve.reserve(opt.steps);

    for (int step = 0; step < opt.steps; ++step) {
        const TrainPair& pair = pairs[rng.next_below(pairs.size())];
        auto pyr = noisy_pyramids(recon, pair.a, pair.b_luma, steps, schedule, rng);
        Value fused = fusion.forward(pyr, /*trainable=*/true);
        auto loss = losses::total_loss_node(fused, pair.a, pair.b_luma, opt.alpha, opt.beta, opt.patch_size,
                                            opt.patch_stride, opt.grad_weight);
        const double total = loss.total->val.item();
        if (!std::isfinite(total))
            throw std::runtime_error("train_stage2: non-finite loss at step " + std::to_string(step));
        adam.zero_grad();
        ops::backward(loss.total);
        adam.step();
        if (!fusion.params().all_finite())
            throw std::runtime_error("train_stage2: non-finite parameter after step " + std::to_string(step));
        curve.push_back(loss.breakdown(opt.alpha, opt.beta));
    }
    return curve;
}

}  // namespace dmfuse
