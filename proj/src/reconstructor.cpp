#include "dmfuse/reconstructor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dmfuse {

using nn::Value;
namespace ops = dmfuse::ad;

void ReconArch::validate() const {
    if (resolution < 16 || resolution % 16 != 0) throw std::invalid_argument("ReconArch: resolution must be a positive multiple of 16");
    if (base_width <= 0) throw std::invalid_argument("ReconArch: base_width must be positive");
    if (time_embed_dim <= 0 || time_embed_dim % 2 != 0) throw std::invalid_argument("ReconArch: time_embed_dim must be positive and even");
    for (int m : mult)
        if (m <= 0) throw std::invalid_argument("ReconArch: channel multiplier must be positive");
}

int ReconArch::level_channels(int level) const {
    if (level < 1 || level > 5) throw std::out_of_range("level_channels");
    return base_width * mult[5 - level];
}

int ReconArch::level_size(int level) const {
    if (level < 1 || level > 5) throw std::out_of_range("level_size");
    return resolution >> (5 - level);
}

Value Reconstructor::ResBlock::operator()(const Value& x, const Value& emb, bool trainable) const {
    Value h = conv1(ops::silu(gn1(x, trainable)), trainable);
    h = ops::add_chan_bias(h, time_proj(emb, trainable));
    h = conv2(ops::silu(gn2(h, trainable)), trainable);
    Value s = reshape ? skip(x, trainable) : x;
    return ops::add(s, h);
}

Reconstructor::ResBlock Reconstructor::make_block(SplitMix64& rng, const std::string& name, int cin, int cout) {
    ResBlock b;
    b.gn1 = nn::GroupNorm::make(params_, name + ".gn1", cin);
    b.conv1 = nn::Conv2d::make(params_, rng, name + ".conv1", cin, cout, 3);
    b.time_proj = nn::Linear::make(params_, rng, name + ".temb", arch_.time_embed_dim, cout);
    b.gn2 = nn::GroupNorm::make(params_, name + ".gn2", cout);
    b.conv2 = nn::Conv2d::make(params_, rng, name + ".conv2", cout, cout, 3, 1, 1, nn::Init::Zero);
    b.reshape = cin != cout;
    if (b.reshape) b.skip = nn::Conv2d::make(params_, rng, name + ".skip", cin, cout, 1, 1, 1, nn::Init::Xavier);
    return b;
}

Reconstructor::Reconstructor(const ReconArch& arch, uint64_t seed) : arch_(arch), seed_(seed) {
    arch_.validate();
    SplitMix64 rng(SplitMix64::derive(seed, 0x5ec0));
    const int c5 = arch_.level_channels(5), c4 = arch_.level_channels(4), c3 = arch_.level_channels(3),
              c2 = arch_.level_channels(2), c1 = arch_.level_channels(1);
    const int d = arch_.time_embed_dim;

    net_.emb1 = nn::Linear::make(params_, rng, "temb.fc1", d, d);
    net_.emb2 = nn::Linear::make(params_, rng, "temb.fc2", d, d);
    net_.stem = nn::Conv2d::make(params_, rng, "stem", 1, c5, 3);

    const int enc_in[5] = {c5, c5, c4, c3, c2};
    const int enc_out[5] = {c5, c4, c3, c2, c1};
    for (int i = 0; i < 5; ++i) net_.enc[i] = make_block(rng, "enc" + std::to_string(5 - i), enc_in[i], enc_out[i]);
    for (int i = 0; i < 4; ++i)
        net_.down[i] = nn::Conv2d::make(params_, rng, "down" + std::to_string(5 - i), enc_out[i], enc_out[i], 3, 2);

    // decoder: dec1 at the bottleneck, then upsample + concat encoder skip
    net_.dec[0] = make_block(rng, "dec1", c1, c1);
    const int dec_in[4] = {c1 + c2, c2 + c3, c3 + c4, c4 + c5};
    const int dec_out[4] = {c2, c3, c4, c5};
    const int up_ch[4] = {c1, c2, c3, c4};
    for (int i = 0; i < 4; ++i) {
        net_.up_conv[i] = nn::Conv2d::make(params_, rng, "up" + std::to_string(i + 1), up_ch[i], up_ch[i], 3);
        net_.dec[i + 1] = make_block(rng, "dec" + std::to_string(i + 2), dec_in[i], dec_out[i]);
    }
    net_.out_norm = nn::GroupNorm::make(params_, "out.gn", c5);
    net_.out_conv = nn::Conv2d::make(params_, rng, "out.conv", c5, 1, 3, 1, 1, nn::Init::Zero);
}

Value Reconstructor::embed(int t, bool trainable) const {
    Value e = ops::constant(nn::sinusoidal_embedding(t, arch_.time_embed_dim));
    return net_.emb2(ops::silu(net_.emb1(e, trainable)), trainable);
}

Reconstructor::ForwardResult Reconstructor::forward(const Value& noisy, int t, bool trainable) const {
    if (noisy->val.c != 1 || noisy->val.h != arch_.resolution || noisy->val.w != arch_.resolution)
        throw std::invalid_argument("Reconstructor::forward: input does not match configured resolution");
    if (t < 0) throw std::invalid_argument("Reconstructor::forward: negative time step");
    Value emb = embed(t, trainable);

    std::array<Value, 5> skips;  // per encoder level, finest first
    Value x = net_.stem(noisy, trainable);
    for (int i = 0; i < 5; ++i) {
        x = net_.enc[i](x, emb, trainable);
        skips[i] = x;
        if (i < 4) x = net_.down[i](x, trainable);
    }

    ForwardResult out;
    x = net_.dec[0](x, emb, trainable);
    out.taps[0] = x;
    for (int i = 0; i < 4; ++i) {
        x = net_.up_conv[i](ops::upsample_bilinear2(x), trainable);
        x = ops::concat({x, skips[3 - i]});
        x = net_.dec[i + 1](x, emb, trainable);
        out.taps[i + 1] = x;
    }
    // global residual: the previous-step image is the input minus one noise
    // step, so the network only has to learn the correction
    Value delta = net_.out_conv(ops::silu(net_.out_norm(x, trainable)), trainable);
    out.pred = ops::add(noisy, delta);
    return out;
}

RawField Reconstructor::predict_previous(const RawField& noisy, int t) const {
    auto fwd = forward(ops::constant(noisy.to_tensor()), t, /*trainable=*/false);
    return RawField::from_tensor(fwd.pred->val);
}

FeaturePyramid Reconstructor::extract_features(const RawField& noisy, int t) const {
    auto fwd = forward(ops::constant(noisy.to_tensor()), t, /*trainable=*/false);
    FeaturePyramid pyr;
    for (int i = 0; i < 5; ++i) pyr.levels[i] = fwd.taps[i]->val;
    return pyr;
}

std::vector<double> train_stage1(Reconstructor& net, const std::vector<GrayImage>& dataset,
                                 const NoiseSchedule& schedule, const Stage1Options& opt) {
    if (dataset.empty()) throw std::invalid_argument("train_stage1: empty dataset");
    const int res = net.arch().resolution;
    for (const auto& img : dataset)
        if (img.height() != res || img.width() != res)
            throw std::invalid_argument("train_stage1: image does not match configured resolution");

    nn::Adam adam(net.params(), opt.learning_rate, opt.adam_beta1, opt.adam_beta2);
    SplitMix64 rng(SplitMix64::derive(opt.seed, 0x51a6e1));
    std::vector<double> losses;
    losses.reserve(opt.steps);

    for (int step = 0; step < opt.steps; ++step) {
        const auto& clean = dataset[rng.next_below(dataset.size())];
        RawField input(res, res), target(res, res);
        int t = 0;
        if (opt.use_diffusion) {
            t = 1 + static_cast<int>(rng.next_below(schedule.T));
            // One noise field drives both the t-1 jump and the step to t, so
            // the prediction target is a concrete image, not a distribution.
            RawField noise(res, res);
            for (double& x : noise.v) x = rng.next_normal();
            target = forward_jump(clean, t - 1, schedule, noise);
            input = forward_step(target, t, schedule, noise);
        } else {
            input = clean.field();
            target = clean.field();
        }

        auto fwd = net.forward(ops::constant(input.to_tensor()), t, /*trainable=*/true);
        Value loss = ops::mean(ops::abs(ops::sub_const(fwd.pred, target.to_tensor())));
        const double loss_val = loss->val.item();
        if (!std::isfinite(loss_val))
            throw std::runtime_error("train_stage1: non-finite loss at step " + std::to_string(step));
        adam.zero_grad();
        ops::backward(loss);
        adam.step();
        if (!net.params().all_finite())
            throw std::runtime_error("train_stage1: non-finite parameter after step " + std::to_string(step));
        losses.push_back(loss_val);
    }
    return losses;
}

}  // namespace dmfuse
