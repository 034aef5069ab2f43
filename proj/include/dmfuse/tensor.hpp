#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dmfuse {

/// Dense (channels, height, width) grid of doubles, row-major within a channel.
/// The workhorse value type for network activations and parameter blocks.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.0) {
        if (c_ <= 0 || h_ <= 0 || w_ <= 0) throw std::invalid_argument("Tensor: non-positive dims");
    }

    static Tensor zeros(int c, int h, int w) { return Tensor(c, h, w); }
    static Tensor full(int c, int h, int w, double val) {
        Tensor t(c, h, w);
        std::fill(t.v.begin(), t.v.end(), val);
        return t;
    }
    static Tensor scalar(double val) { return full(1, 1, 1, val); }

    size_t size() const { return v.size(); }
    int plane() const { return h * w; }
    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    double& at(int ci, int yi, int xi) { return v[(static_cast<size_t>(ci) * h + yi) * w + xi]; }
    double at(int ci, int yi, int xi) const { return v[(static_cast<size_t>(ci) * h + yi) * w + xi]; }

    double* data() { return v.data(); }
    const double* data() const { return v.data(); }
    double* chan(int ci) { return v.data() + static_cast<size_t>(ci) * plane(); }
    const double* chan(int ci) const { return v.data() + static_cast<size_t>(ci) * plane(); }

    double item() const {
        if (size() != 1) throw std::logic_error("Tensor::item on non-scalar");
        return v[0];
    }

    bool all_finite() const;
    void fill(double val) { std::fill(v.begin(), v.end(), val); }
};

void add_inplace(Tensor& dst, const Tensor& src);

}  // namespace dmfuse
