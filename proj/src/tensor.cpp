#include "dmfuse/tensor.hpp"

#include <cmath>

namespace dmfuse {

bool Tensor::all_finite() const {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void add_inplace(Tensor& dst, const Tensor& src) {
    if (!dst.same_shape(src)) throw std::invalid_argument("add_inplace: shape mismatch");
    for (size_t i = 0; i < dst.v.size(); ++i) dst.v[i] += src.v[i];
}

}  // namespace dmfuse
