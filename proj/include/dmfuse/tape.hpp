#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dmfuse/tensor.hpp"

namespace dmfuse::ad {

/// Trainable tensor living outside any graph. Gradients accumulate into
/// `grad` when a graph built over leaf() nodes is backpropagated.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.c, value.h, value.w) {}
    void zero_grad() { grad.fill(0.0); }
    size_t size() const { return value.size(); }
};

class Node;
using Value = std::shared_ptr<Node>;

/// One vertex of a dynamically built computation graph.
class Node {
public:
    Tensor val;
    Tensor grad;  // allocated on demand during backward
    bool requires_grad = false;
    std::vector<Value> parents;
    std::function<void(Node&)> backfn;  // scatters this->grad into parents / parameter grads

    void ensure_grad() {
        if (grad.size() != val.size()) grad = Tensor(val.c, val.h, val.w);
    }
};

/// Runs reverse-mode accumulation from a scalar root (seeds d(root)=1).
void backward(const Value& root);

Value constant(Tensor t);
/// Graph leaf bound to a parameter; trainable=false detaches it (used for
/// frozen networks).
Value leaf(Parameter& p, bool trainable = true);
/// Value-copied constant leaf; cuts the graph above `x`.
Value detach(const Value& x);

// ---- elementwise ----
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);
Value add_scalar(const Value& a, double s);
Value scale(const Value& a, double k);
Value sub_const(const Value& a, const Tensor& t);  // a - t
Value mul_const(const Value& a, const Tensor& t);  // a .* t
Value sigmoid(const Value& x);
Value silu(const Value& x);
Value abs(const Value& x);                      // subgradient 0 at 0
Value hypot(const Value& a, const Value& b);    // sqrt(a^2+b^2), grad 0 where 0

// ---- broadcasting ----
Value mul_chan(const Value& x, const Value& g);      // (C,H,W) .* (C,1,1)
Value mul_spatial(const Value& x, const Value& g);   // (C,H,W) .* (1,H,W)
Value add_chan_bias(const Value& x, const Value& b); // (C,H,W) + (C,1,1)
Value mul_scalar_node(const Value& x, const Value& s);  // (.,.,.) .* (1,1,1)
Value expand_chan(const Value& g, int h, int w);     // (C,1,1) -> (C,H,W)
Value expand_spatial(const Value& g, int c);         // (1,H,W) -> (C,H,W)

// ---- reductions ----
Value mean(const Value& x);             // -> (1,1,1)
Value sum(const Value& x);              // -> (1,1,1)
Value global_avg_pool(const Value& x);  // -> (C,1,1)
Value channel_mean(const Value& x);     // -> (1,H,W)
Value channel_max(const Value& x);      // -> (1,H,W)

// ---- structure ----
Value concat(const std::vector<Value>& xs);            // along channels
Value channel_shuffle(const Value& x, int groups);     // group-transpose permutation
Value crop(const Value& x, int y0, int x0, int h, int w);
Value upsample_bilinear2(const Value& x);

enum class PadMode { Zero, Replicate };

/// 2-D convolution; weight (outC, inC/groups * k * k) laid out row-major,
/// optional bias (outC,1,1). Padding keeps `same` geometry when pad = k/2.
Value conv2d(const Value& x, const Value& w, const Value& b, int k, int stride, int pad, PadMode mode, int groups);

/// GroupNorm over channel groups with affine (gamma, beta) of shape (C,1,1).
Value group_norm(const Value& x, const Value& gamma, const Value& beta, int groups, double eps = 1e-5);

}  // namespace dmfuse::ad
