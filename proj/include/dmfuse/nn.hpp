#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dmfuse/rng.hpp"
#include "dmfuse/tape.hpp"

namespace dmfuse::nn {

using ad::PadMode;
using ad::Parameter;
using ad::Value;

/// Owns every parameter of one network; registration order defines both
/// the init stream order and the checkpoint layout.
class ParamStore {
public:
    Parameter* create(const std::string& name, int c, int h, int w);
    const std::vector<std::unique_ptr<Parameter>>& all() const { return params_; }
    Parameter* find(const std::string& name) const;
    size_t parameter_count() const;
    void zero_grads();
    bool all_finite() const;

private:
    std::vector<std::unique_ptr<Parameter>> params_;
};

/// He for convs feeding a nonlinearity, Xavier for linear chains (keeps
/// the variance flat through conv-only paths), Zero for output heads.
enum class Init { He, Xavier, Zero };

void init_conv_weight(Parameter& p, int fan_in, Init init, SplitMix64& rng);

struct Conv2d {
    Parameter* w = nullptr;
    Parameter* b = nullptr;
    int k = 3, stride = 1, pad = 1, groups = 1;
    PadMode mode = PadMode::Zero;

    static Conv2d make(ParamStore& ps, SplitMix64& rng, const std::string& name, int cin, int cout, int k,
                       int stride = 1, int groups = 1, Init init = Init::He, bool bias = true);
    Value operator()(const Value& x, bool trainable = true) const;
};

struct GroupNorm {
    Parameter* gamma = nullptr;
    Parameter* beta = nullptr;
    int groups = 1;

    static GroupNorm make(ParamStore& ps, const std::string& name, int channels);
    Value operator()(const Value& x, bool trainable = true) const;
};

/// Fully connected map on (C,1,1) vectors, implemented as a 1x1 conv.
struct Linear {
    Conv2d conv;
    static Linear make(ParamStore& ps, SplitMix64& rng, const std::string& name, int in, int out,
                       Init init = Init::He);
    Value operator()(const Value& x, bool trainable = true) const;
};

/// Sinusoidal position embedding of an integer time step, dim must be even.
Tensor sinusoidal_embedding(int t, int dim);

/// Adam with bias correction; deterministic given the parameter order.
class Adam {
public:
    Adam(ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step();
    void zero_grad();
    double lr() const { return lr_; }

private:
    ParamStore& store_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace dmfuse::nn
