#include "dmfuse/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "dmfuse/rng.hpp"

namespace dmfuse {

double NoiseSchedule::alpha(int t) const {
    if (t < 1 || t > T) throw std::out_of_range("NoiseSchedule::alpha: t outside [1,T]");
    return alphas[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
    if (t < 0 || t > T) throw std::out_of_range("NoiseSchedule::alpha_bar: t outside [0,T]");
    return t == 0 ? 1.0 : alpha_bars[t - 1];
}

TimeStepSet::TimeStepSet(std::vector<int> s) : steps(std::move(s)) {
    if (steps.empty()) throw std::invalid_argument("TimeStepSet: empty");
    for (size_t i = 0; i < steps.size(); ++i) {
        if (steps[i] < 0) throw std::invalid_argument("TimeStepSet: negative step");
        if (i > 0 && steps[i] <= steps[i - 1]) throw std::invalid_argument("TimeStepSet: not strictly increasing");
    }
}

void TimeStepSet::validate_against(const NoiseSchedule& schedule) const {
    if (steps.back() > schedule.T) throw std::invalid_argument("TimeStepSet: step beyond schedule T");
}

NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("make_linear_schedule: T < 1");
    if (!(beta_start >= 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("make_linear_schedule: betas must satisfy 0 <= start <= end < 1");
    NoiseSchedule s;
    s.T = T;
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
        const double beta = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * t / (T - 1);
        s.alphas[t] = 1.0 - beta;
        prod *= s.alphas[t];
        s.alpha_bars[t] = prod;
    }
    if (s.alpha_bars[T - 1] <= 0.0) throw std::invalid_argument("make_linear_schedule: total signal destruction");
    return s;
}

namespace {

RawField affine_mix(const RawField& signal, double a, const RawField& noise, double b) {
    if (!signal.same_shape(noise)) throw std::invalid_argument("diffusion: signal/noise shape mismatch");
    RawField out(signal.height, signal.width);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = a * signal.v[i] + b * noise.v[i];
    return out;
}

}  // namespace

RawField forward_step(const RawField& prev, int t, const NoiseSchedule& schedule, const RawField& noise) {
    const double a = schedule.alpha(t);  // throws when t outside [1,T]
    return affine_mix(prev, std::sqrt(a), noise, std::sqrt(1.0 - a));
}

RawField forward_jump(const RawField& clean, int t, const NoiseSchedule& schedule, const RawField& noise) {
    const double ab = schedule.alpha_bar(t);
    if (t == 0) return clean;
    return affine_mix(clean, std::sqrt(ab), noise, std::sqrt(1.0 - ab));
}

RawField forward_jump(const GrayImage& clean, int t, const NoiseSchedule& schedule, const RawField& noise) {
    return forward_jump(clean.field(), t, schedule, noise);
}

double stage1_loss(const RawField& predicted_prev, const RawField& true_prev) {
    if (!predicted_prev.same_shape(true_prev)) throw std::invalid_argument("stage1_loss: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < predicted_prev.v.size(); ++i) acc += std::abs(true_prev.v[i] - predicted_prev.v[i]);
    return acc / static_cast<double>(predicted_prev.v.size());
}

RawField gaussian_field(int h, int w, uint64_t seed) {
    SplitMix64 rng(seed);
    RawField f(h, w);
    for (double& x : f.v) x = rng.next_normal();
    return f;
}

}  // namespace dmfuse
