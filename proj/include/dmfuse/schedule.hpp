#pragma once

#include <vector>

#include "dmfuse/image.hpp"

namespace dmfuse {

/// Variance schedule for the forward corruption process. alpha_bars[t] is
/// the cumulative product of alphas up to step t (1-indexed); step 0 means
/// no corruption.
struct NoiseSchedule {
    int T = 0;
    std::vector<double> alphas;      // length T, values in (0,1]
    std::vector<double> alpha_bars;  // length T, strictly positive, non-increasing

    double alpha(int t) const;      // t in [1,T]
    double alpha_bar(int t) const;  // t in [0,T]; alpha_bar(0) == 1
};

/// Ordered noise step set fed to the fusion network; steps lie in [0,T]
/// where step 0 is the identity (no noise).
struct TimeStepSet {
    std::vector<int> steps;

    explicit TimeStepSet(std::vector<int> s);
    size_t count() const { return steps.size(); }
    void validate_against(const NoiseSchedule& schedule) const;
};

/// Linear beta schedule: alphas[t] = 1 - beta_t with beta linearly spaced
/// over [beta_start, beta_end]. Betas must satisfy 0 <= start <= end < 1
/// (start == 0 yields a noiseless schedule).
NoiseSchedule make_linear_schedule(int T, double beta_start, double beta_end);

/// Single corruption step: sqrt(alpha_t) * prev + sqrt(1 - alpha_t) * noise.
RawField forward_step(const RawField& prev, int t, const NoiseSchedule& schedule, const RawField& noise);

/// Direct corruption from the clean image:
/// sqrt(alpha_bar_t) * clean + sqrt(1 - alpha_bar_t) * noise. t == 0 is the identity.
RawField forward_jump(const GrayImage& clean, int t, const NoiseSchedule& schedule, const RawField& noise);
RawField forward_jump(const RawField& clean, int t, const NoiseSchedule& schedule, const RawField& noise);

/// Mean absolute error between the predicted and the actual previous-step
/// image; the Stage I training objective.
double stage1_loss(const RawField& predicted_prev, const RawField& true_prev);

/// Standard-normal field drawn from a SplitMix64 stream.
RawField gaussian_field(int h, int w, uint64_t seed);

}  // namespace dmfuse
