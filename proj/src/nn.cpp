#include "dmfuse/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dmfuse::nn {

Parameter* ParamStore::create(const std::string& name, int c, int h, int w) {
    if (find(name)) throw std::logic_error("ParamStore: duplicate parameter " + name);
    params_.push_back(std::make_unique<Parameter>(name, Tensor(c, h, w)));
    return params_.back().get();
}

Parameter* ParamStore::find(const std::string& name) const {
    for (const auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

size_t ParamStore::parameter_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
}

void ParamStore::zero_grads() {
    for (const auto& p : params_) p->zero_grad();
}

bool ParamStore::all_finite() const {
    for (const auto& p : params_)
        if (!p->value.all_finite()) return false;
    return true;
}

void init_conv_weight(Parameter& p, int fan_in, Init init, SplitMix64& rng) {
    if (init == Init::Zero) return;
    const double std = std::sqrt((init == Init::He ? 2.0 : 1.0) / fan_in);
    for (double& x : p.value.v) x = std * rng.next_normal();
}

Conv2d Conv2d::make(ParamStore& ps, SplitMix64& rng, const std::string& name, int cin, int cout, int k, int stride,
                    int groups, Init init, bool bias) {
    if (cin <= 0 || cout <= 0) throw std::invalid_argument("Conv2d: non-positive width");
    if (cin % groups != 0 || cout % groups != 0) throw std::invalid_argument("Conv2d: groups must divide channels");
    Conv2d c;
    c.k = k;
    c.stride = stride;
    c.pad = k / 2;
    c.groups = groups;
    c.w = ps.create(name + ".w", cout, cin / groups, k * k);
    init_conv_weight(*c.w, (cin / groups) * k * k, init, rng);
    if (bias) c.b = ps.create(name + ".b", cout, 1, 1);
    return c;
}

Value Conv2d::operator()(const Value& x, bool trainable) const {
    Value wv = ad::leaf(*w, trainable);
    Value bv = b ? ad::leaf(*b, trainable) : nullptr;
    return ad::conv2d(x, wv, bv, k, stride, pad, mode, groups);
}

GroupNorm GroupNorm::make(ParamStore& ps, const std::string& name, int channels) {
    GroupNorm g;
    // largest group count <= 8 that divides the channel width
    for (int cand = std::min(8, channels); cand >= 1; --cand) {
        if (channels % cand == 0) {
            g.groups = cand;
            break;
        }
    }
    g.gamma = ps.create(name + ".gamma", channels, 1, 1);
    g.gamma->value.fill(1.0);
    g.beta = ps.create(name + ".beta", channels, 1, 1);
    return g;
}

Value GroupNorm::operator()(const Value& x, bool trainable) const {
    return ad::group_norm(x, ad::leaf(*gamma, trainable), ad::leaf(*beta, trainable), groups);
}

Linear Linear::make(ParamStore& ps, SplitMix64& rng, const std::string& name, int in, int out, Init init) {
    Linear l;
    l.conv = Conv2d::make(ps, rng, name, in, out, 1, 1, 1, init, true);
    return l;
}

Value Linear::operator()(const Value& x, bool trainable) const { return conv(x, trainable); }

Tensor sinusoidal_embedding(int t, int dim) {
    if (dim % 2 != 0) throw std::invalid_argument("sinusoidal_embedding: dim must be even");
    Tensor e(dim, 1, 1);
    const int half = dim / 2;
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e.v[i] = std::sin(t * freq);
        e.v[half + i] = std::cos(t * freq);
    }
    return e;
}

Adam::Adam(ParamStore& store, double lr, double beta1, double beta2, double eps)
    : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : store.all()) {
        m_.emplace_back(p->size(), 0.0);
        v_.emplace_back(p->size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    const auto& params = store_.all();
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        auto& m = m_[pi];
        auto& v = v_[pi];
        for (size_t i = 0; i < p.size(); ++i) {
            const double g = p.grad.v[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            p.value.v[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

void Adam::zero_grad() { store_.zero_grads(); }

}  // namespace dmfuse::nn
