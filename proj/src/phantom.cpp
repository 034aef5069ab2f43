#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dmfuse/data.hpp"
#include "dmfuse/rng.hpp"

namespace dmfuse::data {

namespace {

struct Grid {
    int n;
    std::vector<double> v;
    explicit Grid(int n_) : n(n_), v(static_cast<size_t>(n_) * n_, 0.0) {}
    double& at(int y, int x) { return v[static_cast<size_t>(y) * n + x]; }
    double at(int y, int x) const { return v[static_cast<size_t>(y) * n + x]; }
};

/// Elliptical "anatomy" shared by both modalities of a pair.
struct Anatomy {
    double cy, cx, ry, rx, cos_t, sin_t;

    double radius(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double u = dx * cos_t + dy * sin_t;
        const double w = -dx * sin_t + dy * cos_t;
        return std::sqrt((u / rx) * (u / rx) + (w / ry) * (w / ry));
    }
};

Anatomy draw_anatomy(SplitMix64& rng, int n) {
    Anatomy a;
    a.cy = n * (0.5 + 0.04 * (rng.next_uniform() - 0.5));
    a.cx = n * (0.5 + 0.04 * (rng.next_uniform() - 0.5));
    a.ry = n * (0.40 + 0.05 * rng.next_uniform());
    a.rx = n * (0.33 + 0.05 * rng.next_uniform());
    const double theta = rng.next_uniform() * M_PI;
    a.cos_t = std::cos(theta);
    a.sin_t = std::sin(theta);
    return a;
}

double smoothstep(double lo, double hi, double x) {
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

/// Band-limited value noise: a coarse random lattice upsampled bilinearly.
Grid value_noise(SplitMix64& rng, int n, int cell) {
    const int cn = n / cell + 2;
    std::vector<double> lattice(static_cast<size_t>(cn) * cn);
    for (double& x : lattice) x = rng.next_uniform();
    Grid out(n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double fy = static_cast<double>(y) / cell, fx = static_cast<double>(x) / cell;
            const int y0 = static_cast<int>(fy), x0 = static_cast<int>(fx);
            const double ty = fy - y0, tx = fx - x0;
            auto l = [&](int yy, int xx) { return lattice[static_cast<size_t>(yy) * cn + xx]; };
            out.at(y, x) = (1 - ty) * ((1 - tx) * l(y0, x0) + tx * l(y0, x0 + 1)) +
                           ty * ((1 - tx) * l(y0 + 1, x0) + tx * l(y0 + 1, x0 + 1));
        }
    return out;
}

void add_gaussian_blob(Grid& g, double cy, double cx, double sigma, double peak) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    const int y0 = std::max(0, static_cast<int>(cy) - r), y1 = std::min(g.n - 1, static_cast<int>(cy) + r);
    const int x0 = std::max(0, static_cast<int>(cx) - r), x1 = std::min(g.n - 1, static_cast<int>(cx) + r);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            g.at(y, x) += peak * std::exp(-d2 / (2.0 * sigma * sigma));
        }
}

/// Dark curved contours ("sulci") carved into the texture image.
void carve_contours(Grid& g, SplitMix64& rng, const Anatomy& an, int count) {
    for (int c = 0; c < count; ++c) {
        double y = an.cy + (rng.next_uniform() - 0.5) * an.ry;
        double x = an.cx + (rng.next_uniform() - 0.5) * an.rx;
        double dir = rng.next_uniform() * 2.0 * M_PI;
        double curl = (rng.next_uniform() - 0.5) * 0.35;
        const int steps = g.n;
        for (int s = 0; s < steps; ++s) {
            dir += curl * 0.2;
            y += std::sin(dir);
            x += std::cos(dir);
            if (y < 1 || x < 1 || y > g.n - 2 || x > g.n - 2) break;
            if (an.radius(y, x) > 0.92) break;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const double fall = (dy == 0 && dx == 0) ? 0.55 : 0.25;
                    const int yy = static_cast<int>(y) + dy, xx = static_cast<int>(x) + dx;
                    g.at(yy, xx) = std::min(g.at(yy, xx), g.at(yy, xx) * (1.0 - fall));
                }
        }
    }
}

GrayImage texture_modality(SplitMix64& rng, const Anatomy& an, const PhantomSpec& spec) {
    const int n = spec.size;
    Grid coarse = value_noise(rng, n, std::max(2, n / 8));
    Grid fine = value_noise(rng, n, std::max(2, n / 16));
    Grid tex(n);
    for (size_t i = 0; i < tex.v.size(); ++i) tex.v[i] = 0.15 + 0.7 * (0.75 * coarse.v[i] + 0.25 * fine.v[i]);
    // one smoothing pass keeps the texture band-limited, like soft tissue
    Grid blurred(n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    acc += tex.at(std::clamp(y + dy, 0, n - 1), std::clamp(x + dx, 0, n - 1));
            blurred.at(y, x) = acc / 9.0;
        }
    tex = blurred;
    const int contours = std::max(1, static_cast<int>(std::lround(3.0 * spec.edge_density)));
    carve_contours(tex, rng, an, contours);
    // two soft bright lesions
    for (int i = 0; i < 2; ++i) {
        const double cy = an.cy + (rng.next_uniform() - 0.5) * an.ry;
        const double cx = an.cx + (rng.next_uniform() - 0.5) * an.rx;
        add_gaussian_blob(tex, cy, cx, n / 14.0, 0.18);
    }
    std::vector<double> px(tex.v.size());
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double r = an.radius(y, x);
            const double inside = 1.0 - smoothstep(0.94, 1.02, r);
            px[static_cast<size_t>(y) * n + x] = std::clamp(0.02 + inside * tex.at(y, x), 0.0, 1.0);
        }
    return GrayImage(n, n, std::move(px));
}

GrayImage dense_modality(SplitMix64& rng, const Anatomy& an, const PhantomSpec& spec) {
    const int n = spec.size;
    Grid g(n);
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double r = an.radius(y, x);
            const double interior = (1.0 - smoothstep(0.82, 0.90, r)) * (0.12 + 0.05 * (1.0 - r));
            // bright rim between the interior and the outside ("skull")
            const double rim = (smoothstep(0.84, 0.90, r) - smoothstep(0.98, 1.06, r)) * 0.95;
            g.at(y, x) = std::max(interior, rim);
        }
    const int blobs = std::max(1, static_cast<int>(std::lround(3.0 * spec.blob_density)));
    for (int i = 0; i < blobs; ++i) {
        double cy, cx;
        do {
            cy = an.cy + (rng.next_uniform() - 0.5) * 1.2 * an.ry;
            cx = an.cx + (rng.next_uniform() - 0.5) * 1.2 * an.rx;
        } while (an.radius(cy, cx) > 0.68);
        add_gaussian_blob(g, cy, cx, n / 28.0 + rng.next_uniform() * n / 40.0, 0.85 + 0.15 * rng.next_uniform());
    }
    std::vector<double> px(g.v.size());
    for (size_t i = 0; i < px.size(); ++i) px[i] = std::clamp(g.v[i], 0.0, 1.0);
    return GrayImage(n, n, std::move(px));
}

ColorImage functional_modality(SplitMix64& rng, const Anatomy& an, const PhantomSpec& spec) {
    const int n = spec.size;
    Grid luma(n), cb(n), cr(n);
    for (double& v : cb.v) v = 0.0;
    for (double& v : cr.v) v = 0.0;
    const int blobs = std::max(2, static_cast<int>(std::lround(4.0 * spec.blob_density)));
    for (int i = 0; i < blobs; ++i) {
        double cy, cx;
        do {
            cy = an.cy + (rng.next_uniform() - 0.5) * 1.4 * an.ry;
            cx = an.cx + (rng.next_uniform() - 0.5) * 1.4 * an.rx;
        } while (an.radius(cy, cx) > 0.8);
        const double sigma = n / 16.0 + rng.next_uniform() * n / 10.0;
        const double peak = 0.55 + 0.4 * rng.next_uniform();
        const double hue = rng.next_uniform() * 2.0 * M_PI;
        Grid shape(n);
        add_gaussian_blob(shape, cy, cx, sigma, 1.0);
        for (size_t j = 0; j < shape.v.size(); ++j) {
            luma.v[j] += peak * shape.v[j];
            cb.v[j] += 0.4 * std::cos(hue) * shape.v[j];
            cr.v[j] += 0.4 * std::sin(hue) * shape.v[j];
        }
    }
    std::vector<double> y(luma.v.size()), pb(luma.v.size()), pr(luma.v.size());
    for (int yy = 0; yy < n; ++yy)
        for (int xx = 0; xx < n; ++xx) {
            const size_t i = static_cast<size_t>(yy) * n + xx;
            const double inside = 1.0 - smoothstep(0.9, 1.0, an.radius(yy, xx));
            y[i] = std::clamp((0.05 + luma.v[i]) * inside, 0.0, 1.0);
            pb[i] = std::clamp(0.5 + cb.v[i] * inside, 0.03, 0.97);
            pr[i] = std::clamp(0.5 + cr.v[i] * inside, 0.03, 0.97);
        }
    YCbCrImage ycc(GrayImage(n, n, std::move(y)), RawField(n, n, std::move(pb)), RawField(n, n, std::move(pr)));
    return ycbcr_to_rgb(ycc);
}

}  // namespace

std::string task_name(PhantomTask task) {
    return task == PhantomTask::StructuralDense ? "structural-dense" : "structural-functional";
}

PhantomTask task_from_name(const std::string& name) {
    if (name == "structural-dense") return PhantomTask::StructuralDense;
    if (name == "structural-functional") return PhantomTask::StructuralFunctional;
    throw std::invalid_argument("unknown phantom task: " + name);
}

PhantomPair gen_phantom_pair(const PhantomSpec& spec) {
    if (spec.size < 16 || spec.size % 16 != 0)
        throw std::invalid_argument("gen_phantom_pair: size must be a positive multiple of 16");
    SplitMix64 shape_rng(SplitMix64::derive(spec.seed, 1));
    SplitMix64 a_rng(SplitMix64::derive(spec.seed, 2));
    SplitMix64 b_rng(SplitMix64::derive(spec.seed, 3));
    const Anatomy an = draw_anatomy(shape_rng, spec.size);
    GrayImage a = texture_modality(a_rng, an, spec);
    if (spec.task == PhantomTask::StructuralDense) return {std::move(a), dense_modality(b_rng, an, spec)};
    return {std::move(a), functional_modality(b_rng, an, spec)};
}

}  // namespace dmfuse::data
