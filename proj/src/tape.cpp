#include "dmfuse/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace dmfuse::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::MatrixXd;

Value make_node(Tensor val, std::vector<Value> parents, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backfn = std::move(back);
    }
    return n;
}

void accumulate(const Value& p, const Tensor& g) {
    if (!p->requires_grad) return;
    p->ensure_grad();
    add_inplace(p->grad, g);
}

void check_same(const Value& a, const Value& b, const char* op) {
    if (!a->val.same_shape(b->val)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

void backward(const Value& root) {
    if (root->val.size() != 1) throw std::logic_error("backward: root must be scalar");
    // Reverse postorder guarantees every node runs after all of its consumers.
    std::vector<Node*> order;
    std::vector<std::pair<Node*, size_t>> stack;
    std::unordered_set<Node*> seen;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Node* parent = node->parents[idx++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad.v[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backfn && n->grad.size() == n->val.size()) n->backfn(*n);
    }
}

Value constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    return n;
}

Value leaf(Parameter& p, bool trainable) {
    auto n = std::make_shared<Node>();
    n->val = p.value;
    n->requires_grad = trainable;
    if (trainable) {
        Parameter* pp = &p;
        n->backfn = [pp](Node& self) { add_inplace(pp->grad, self.grad); };
    }
    return n;
}

Value detach(const Value& x) { return constant(x->val); }

Value add(const Value& a, const Value& b) {
    check_same(a, b, "add");
    Tensor out = a->val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += b->val.v[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        accumulate(a, self.grad);
        accumulate(b, self.grad);
    });
}

Value sub(const Value& a, const Value& b) {
    check_same(a, b, "sub");
    Tensor out = a->val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= b->val.v[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        accumulate(a, self.grad);
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.grad.v.size(); ++i) b->grad.v[i] -= self.grad.v[i];
        }
    });
}

Value mul(const Value& a, const Value& b) {
    check_same(a, b, "mul");
    Tensor out = a->val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= b->val.v[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += self.grad.v[i] * b->val.v[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.grad.v.size(); ++i) b->grad.v[i] += self.grad.v[i] * a->val.v[i];
        }
    });
}

Value div(const Value& a, const Value& b) {
    check_same(a, b, "div");
    Tensor out = a->val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] /= b->val.v[i];
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += self.grad.v[i] / b->val.v[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (size_t i = 0; i < self.grad.v.size(); ++i)
                b->grad.v[i] -= self.grad.v[i] * a->val.v[i] / (b->val.v[i] * b->val.v[i]);
        }
    });
}

Value add_scalar(const Value& a, double s) {
    Tensor out = a->val;
    for (double& x : out.v) x += s;
    return make_node(std::move(out), {a}, [a](Node& self) { accumulate(a, self.grad); });
}

Value scale(const Value& a, double k) {
    Tensor out = a->val;
    for (double& x : out.v) x *= k;
    return make_node(std::move(out), {a}, [a, k](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += k * self.grad.v[i];
    });
}

Value sub_const(const Value& a, const Tensor& t) {
    if (!a->val.same_shape(t)) throw std::invalid_argument("sub_const: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= t.v[i];
    return make_node(std::move(out), {a}, [a](Node& self) { accumulate(a, self.grad); });
}

Value mul_const(const Value& a, const Tensor& t) {
    if (!a->val.same_shape(t)) throw std::invalid_argument("mul_const: shape mismatch");
    Tensor out = a->val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= t.v[i];
    Tensor tc = t;
    return make_node(std::move(out), {a}, [a, tc](Node& self) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (size_t i = 0; i < self.grad.v.size(); ++i) a->grad.v[i] += self.grad.v[i] * tc.v[i];
    });
}

Value sigmoid(const Value& x) {
    Tensor out = x->val;
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    auto n = make_node(std::move(out), {x}, nullptr);
    if (n->requires_grad) {
        Node* self_raw = n.get();
        n->backfn = [x, self_raw](Node& self) {
            (void)self_raw;
            x->ensure_grad();
            for (size_t i = 0; i < self.grad.v.size(); ++i) {
                const double s = self.val.v[i];
                x->grad.v[i] += self.grad.v[i] * s * (1.0 - s);
            }
        };
    }
    return n;
}

Value silu(const Value& x) {
    Tensor out = x->val;
    for (double& v : out.v) v = v / (1.0 + std::exp(-v));
    return make_node(std::move(out), {x}, [x](Node& self) {
        x->ensure_grad();
        for (size_t i = 0; i < self.grad.v.size(); ++i) {
            const double v = x->val.v[i];
            const double s = 1.0 / (1.0 + std::exp(-v));
            x->grad.v[i] += self.grad.v[i] * s * (1.0 + v * (1.0 - s));
        }
    });
}

Value abs(const Value& x) {
    Tensor out = x->val;
    for (double& v : out.v) v = std::abs(v);
    return make_node(std::move(out), {x}, [x](Node& self) {
        x->ensure_grad();
        for (size_t i = 0; i < self.grad.v.size(); ++i) {
            const double v = x->val.v[i];
            x->grad.v[i] += self.grad.v[i] * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
        }
    });
}

Value hypot(const Value& a, const Value& b) {
    check_same(a, b, "hypot");
    Tensor out = a->val;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::sqrt(out.v[i] * out.v[i] + b->val.v[i] * b->val.v[i]);
    return make_node(std::move(out), {a, b}, [a, b](Node& self) {
        for (size_t i = 0; i < self.grad.v.size(); ++i) {
            const double m = self.val.v[i];
            if (m == 0.0) continue;
            const double g = self.grad.v[i] / m;
            if (a->requires_grad) {
                a->ensure_grad();
                a->grad.v[i] += g * a->val.v[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                b->grad.v[i] += g * b->val.v[i];
            }
        }
    });
}

Value mul_chan(const Value& x, const Value& g) {
    if (g->val.c != x->val.c || g->val.h != 1 || g->val.w != 1) throw std::invalid_argument("mul_chan: gate must be (C,1,1)");
    Tensor out = x->val;
    const int plane = out.plane();
    for (int c = 0; c < out.c; ++c) {
        const double k = g->val.v[c];
        double* p = out.chan(c);
        for (int i = 0; i < plane; ++i) p[i] *= k;
    }
    return make_node(std::move(out), {x, g}, [x, g](Node& self) {
        const int plane = self.val.plane();
        if (x->requires_grad) {
            x->ensure_grad();
            for (int c = 0; c < self.val.c; ++c) {
                const double k = g->val.v[c];
                const double* gr = self.grad.chan(c);
                double* xg = x->grad.chan(c);
                for (int i = 0; i < plane; ++i) xg[i] += gr[i] * k;
            }
        }
        if (g->requires_grad) {
            g->ensure_grad();
            for (int c = 0; c < self.val.c; ++c) {
                const double* gr = self.grad.chan(c);
                const double* xv = x->val.chan(c);
                double acc = 0.0;
                for (int i = 0; i < plane; ++i) acc += gr[i] * xv[i];
                g->grad.v[c] += acc;
            }
        }
    });
}

Value mul_spatial(const Value& x, const Value& g) {
    if (g->val.c != 1 || g->val.h != x->val.h || g->val.w != x->val.w)
        throw std::invalid_argument("mul_spatial: gate must be (1,H,W)");
    Tensor out = x->val;
    const int plane = out.plane();
    for (int c = 0; c < out.c; ++c) {
        double* p = out.chan(c);
        for (int i = 0; i < plane; ++i) p[i] *= g->val.v[i];
    }
    return make_node(std::move(out), {x, g}, [x, g](Node& self) {
        const int plane = self.val.plane();
        if (x->requires_grad) {
            x->ensure_grad();
            for (int c = 0; c < self.val.c; ++c) {
                const double* gr = self.grad.chan(c);
                double* xg = x->grad.chan(c);
                for (int i = 0; i < plane; ++i) xg[i] += gr[i] * g->val.v[i];
            }
        }
        if (g->requires_grad) {
            g->ensure_grad();
            for (int c = 0; c < self.val.c; ++c) {
                const double* gr = self.grad.chan(c);
                const double* xv = x->val.chan(c);
                for (int i = 0; i < plane; ++i) g->grad.v[i] += gr[i] * xv[i];
            }
        }
    });
}

Value add_chan_bias(const Value& x, const Value& b) {
    if (b->val.c != x->val.c || b->val.h != 1 || b->val.w != 1)
        throw std::invalid_argument("add_chan_bias: bias must be (C,1,1)");
    Tensor out = x->val;
    const int plane = out.plane();
    for (int c = 0; c < out.c; ++c) {
        double* p = out.chan(c);
        const double k = b->val.v[c];
        for (int i = 0; i < plane; ++i) p[i] += k;
    }
    return make_node(std::move(out), {x, b}, [x, b](Node& self) {
        const int plane = self.val.plane();
        accumulate(x, self.grad);
        if (b->requires_grad) {
            b->ensure_grad();
            for (int c = 0; c < self.val.c; ++c) {
                const double* gr = self.grad.chan(c);
                double acc = 0.0;
                for (int i = 0; i < plane; ++i) acc += gr[i];
                b->grad.v[c] += acc;
            }
        }
    });
}

Value mul_scalar_node(const Value& x, const Value& s) {
    if (s->val.size() != 1) throw std::invalid_argument("mul_scalar_node: scale must be (1,1,1)");
    Tensor out = x->val;
    for (double& v : out.v) v *= s->val.v[0];
    return make_node(std::move(out), {x, s}, [x, s](Node& self) {
        if (x->requires_grad) {
            x->ensure_grad();
            for (size_t i = 0; i < self.grad.v.size(); ++i) x->grad.v[i] += self.grad.v[i] * s->val.v[0];
        }
        if (s->requires_grad) {
            s->ensure_grad();
            double acc = 0.0;
            for (size_t i = 0; i < self.grad.v.size(); ++i) acc += self.grad.v[i] * x->val.v[i];
            s->grad.v[0] += acc;
        }
    });
}

Value expand_chan(const Value& g, int h, int w) {
    if (g->val.h != 1 || g->val.w != 1) throw std::invalid_argument("expand_chan: input must be (C,1,1)");
    Tensor out(g->val.c, h, w);
    for (int c = 0; c < out.c; ++c) std::fill(out.chan(c), out.chan(c) + out.plane(), g->val.v[c]);
    return make_node(std::move(out), {g}, [g](Node& self) {
        g->ensure_grad();
        const int plane = self.val.plane();
        for (int c = 0; c < self.val.c; ++c) {
            const double* gr = self.grad.chan(c);
            double acc = 0.0;
            for (int i = 0; i < plane; ++i) acc += gr[i];
            g->grad.v[c] += acc;
        }
    });
}

Value expand_spatial(const Value& g, int c) {
    if (g->val.c != 1) throw std::invalid_argument("expand_spatial: input must be (1,H,W)");
    Tensor out(c, g->val.h, g->val.w);
    for (int ci = 0; ci < c; ++ci) std::copy(g->val.v.begin(), g->val.v.end(), out.chan(ci));
    return make_node(std::move(out), {g}, [g](Node& self) {
        g->ensure_grad();
        const int plane = self.val.plane();
        for (int ci = 0; ci < self.val.c; ++ci) {
            const double* gr = self.grad.chan(ci);
            for (int i = 0; i < plane; ++i) g->grad.v[i] += gr[i];
        }
    });
}

Value mean(const Value& x) {
    double acc = 0.0;
    for (double v : x->val.v) acc += v;
    const double n = static_cast<double>(x->val.size());
    return make_node(Tensor::scalar(acc / n), {x}, [x, n](Node& self) {
        x->ensure_grad();
        const double g = self.grad.v[0] / n;
        for (double& v : x->grad.v) v += g;
    });
}

Value sum(const Value& x) {
    double acc = 0.0;
    for (double v : x->val.v) acc += v;
    return make_node(Tensor::scalar(acc), {x}, [x](Node& self) {
        x->ensure_grad();
        const double g = self.grad.v[0];
        for (double& v : x->grad.v) v += g;
    });
}

Value global_avg_pool(const Value& x) {
    Tensor out(x->val.c, 1, 1);
    const int plane = x->val.plane();
    for (int c = 0; c < x->val.c; ++c) {
        const double* p = x->val.chan(c);
        double acc = 0.0;
        for (int i = 0; i < plane; ++i) acc += p[i];
        out.v[c] = acc / plane;
    }
    return make_node(std::move(out), {x}, [x](Node& self) {
        x->ensure_grad();
        const int plane = x->val.plane();
        for (int c = 0; c < x->val.c; ++c) {
            const double g = self.grad.v[c] / plane;
            double* xg = x->grad.chan(c);
            for (int i = 0; i < plane; ++i) xg[i] += g;
        }
    });
}

Value channel_mean(const Value& x) {
    Tensor out(1, x->val.h, x->val.w);
    const int plane = x->val.plane();
    for (int c = 0; c < x->val.c; ++c) {
        const double* p = x->val.chan(c);
        for (int i = 0; i < plane; ++i) out.v[i] += p[i];
    }
    const double inv = 1.0 / x->val.c;
    for (double& v : out.v) v *= inv;
    return make_node(std::move(out), {x}, [x, inv](Node& self) {
        x->ensure_grad();
        const int plane = x->val.plane();
        for (int c = 0; c < x->val.c; ++c) {
            double* xg = x->grad.chan(c);
            for (int i = 0; i < plane; ++i) xg[i] += self.grad.v[i] * inv;
        }
    });
}

Value channel_max(const Value& x) {
    const int plane = x->val.plane();
    Tensor out(1, x->val.h, x->val.w);
    auto argmax = std::make_shared<std::vector<int>>(plane, 0);
    for (int i = 0; i < plane; ++i) {
        double best = x->val.v[i];
        int bc = 0;
        for (int c = 1; c < x->val.c; ++c) {
            const double v = x->val.chan(c)[i];
            if (v > best) {
                best = v;
                bc = c;
            }
        }
        out.v[i] = best;
        (*argmax)[i] = bc;
    }
    return make_node(std::move(out), {x}, [x, argmax](Node& self) {
        x->ensure_grad();
        const int plane = x->val.plane();
        for (int i = 0; i < plane; ++i) x->grad.chan((*argmax)[i])[i] += self.grad.v[i];
    });
}

Value concat(const std::vector<Value>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat: empty");
    int c = 0;
    for (const auto& x : xs) {
        if (x->val.h != xs[0]->val.h || x->val.w != xs[0]->val.w) throw std::invalid_argument("concat: spatial mismatch");
        c += x->val.c;
    }
    Tensor out(c, xs[0]->val.h, xs[0]->val.w);
    size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->val.v.begin(), x->val.v.end(), out.v.begin() + off);
        off += x->val.size();
    }
    return make_node(std::move(out), xs, [xs](Node& self) {
        size_t off = 0;
        for (const auto& x : xs) {
            if (x->requires_grad) {
                x->ensure_grad();
                for (size_t i = 0; i < x->val.size(); ++i) x->grad.v[i] += self.grad.v[off + i];
            }
            off += x->val.size();
        }
    });
}

Value channel_shuffle(const Value& x, int groups) {
    const int c = x->val.c;
    if (groups <= 0 || c % groups != 0) throw std::invalid_argument("channel_shuffle: channels not divisible by groups");
    const int per = c / groups;
    // out channel j*groups+g reads in channel g*per+j (group transpose)
    Tensor out(c, x->val.h, x->val.w);
    const int plane = x->val.plane();
    auto src_of = std::make_shared<std::vector<int>>(c);
    for (int g = 0; g < groups; ++g)
        for (int j = 0; j < per; ++j) (*src_of)[j * groups + g] = g * per + j;
    for (int co = 0; co < c; ++co) std::copy(x->val.chan((*src_of)[co]), x->val.chan((*src_of)[co]) + plane, out.chan(co));
    return make_node(std::move(out), {x}, [x, src_of](Node& self) {
        x->ensure_grad();
        const int plane = x->val.plane();
        for (int co = 0; co < self.val.c; ++co) {
            const double* gr = self.grad.chan(co);
            double* xg = x->grad.chan((*src_of)[co]);
            for (int i = 0; i < plane; ++i) xg[i] += gr[i];
        }
    });
}

Value crop(const Value& x, int y0, int x0, int h, int w) {
    if (y0 < 0 || x0 < 0 || y0 + h > x->val.h || x0 + w > x->val.w) throw std::invalid_argument("crop: out of bounds");
    Tensor out(x->val.c, h, w);
    for (int c = 0; c < out.c; ++c)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) out.at(c, y, xx) = x->val.at(c, y0 + y, x0 + xx);
    return make_node(std::move(out), {x}, [x, y0, x0, h, w](Node& self) {
        x->ensure_grad();
        for (int c = 0; c < self.val.c; ++c)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx) x->grad.at(c, y0 + y, x0 + xx) += self.grad.at(c, y, xx);
    });
}

namespace {

// align_corners=false source coordinate for a x2 bilinear resize
struct Lerp {
    int i0, i1;
    double w0, w1;
};

std::vector<Lerp> lerp_axis(int out_n, int in_n) {
    std::vector<Lerp> l(out_n);
    for (int o = 0; o < out_n; ++o) {
        double s = (o + 0.5) / 2.0 - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in_n - 1));
        const int i0 = static_cast<int>(std::floor(s));
        const int i1 = std::min(i0 + 1, in_n - 1);
        const double f = s - i0;
        l[o] = {i0, i1, 1.0 - f, f};
    }
    return l;
}

}  // namespace

Value upsample_bilinear2(const Value& x) {
    const int c = x->val.c, h = x->val.h, w = x->val.w;
    const int oh = 2 * h, ow = 2 * w;
    auto ly = std::make_shared<std::vector<Lerp>>(lerp_axis(oh, h));
    auto lx = std::make_shared<std::vector<Lerp>>(lerp_axis(ow, w));
    Tensor out(c, oh, ow);
    for (int ci = 0; ci < c; ++ci) {
        const double* src = x->val.chan(ci);
        double* dst = out.chan(ci);
        for (int oy = 0; oy < oh; ++oy) {
            const Lerp& a = (*ly)[oy];
            for (int ox = 0; ox < ow; ++ox) {
                const Lerp& b = (*lx)[ox];
                dst[oy * ow + ox] = a.w0 * (b.w0 * src[a.i0 * w + b.i0] + b.w1 * src[a.i0 * w + b.i1]) +
                                    a.w1 * (b.w0 * src[a.i1 * w + b.i0] + b.w1 * src[a.i1 * w + b.i1]);
            }
        }
    }
    return make_node(std::move(out), {x}, [x, ly, lx](Node& self) {
        x->ensure_grad();
        const int c = x->val.c, h = x->val.h, w = x->val.w;
        const int oh = 2 * h, ow = 2 * w;
        for (int ci = 0; ci < c; ++ci) {
            double* xg = x->grad.chan(ci);
            const double* gr = self.grad.chan(ci);
            for (int oy = 0; oy < oh; ++oy) {
                const Lerp& a = (*ly)[oy];
                for (int ox = 0; ox < ow; ++ox) {
                    const Lerp& b = (*lx)[ox];
                    const double g = gr[oy * ow + ox];
                    xg[a.i0 * w + b.i0] += g * a.w0 * b.w0;
                    xg[a.i0 * w + b.i1] += g * a.w0 * b.w1;
                    xg[a.i1 * w + b.i0] += g * a.w1 * b.w0;
                    xg[a.i1 * w + b.i1] += g * a.w1 * b.w1;
                }
            }
        }
    });
}

namespace {

struct ConvGeom {
    int cin, cout, k, stride, pad, groups, h, w, oh, ow;
    PadMode mode;
};

void im2col_group(const Tensor& x, const ConvGeom& g, int group, std::vector<double>& cols) {
    const int cing = g.cin / g.groups;
    const int K = cing * g.k * g.k;
    const int N = g.oh * g.ow;
    cols.assign(static_cast<size_t>(K) * N, 0.0);
    for (int oy = 0; oy < g.oh; ++oy) {
        for (int ox = 0; ox < g.ow; ++ox) {
            double* col = cols.data() + (static_cast<size_t>(oy) * g.ow + ox) * K;
            int r = 0;
            for (int ci = 0; ci < cing; ++ci) {
                const double* src = x.chan(group * cing + ci);
                for (int ky = 0; ky < g.k; ++ky) {
                    int iy = oy * g.stride + ky - g.pad;
                    const bool oob_y = iy < 0 || iy >= g.h;
                    if (g.mode == PadMode::Replicate) iy = std::clamp(iy, 0, g.h - 1);
                    for (int kx = 0; kx < g.k; ++kx, ++r) {
                        int ix = ox * g.stride + kx - g.pad;
                        const bool oob = oob_y || ix < 0 || ix >= g.w;
                        if (g.mode == PadMode::Zero && oob) continue;
                        if (g.mode == PadMode::Replicate) ix = std::clamp(ix, 0, g.w - 1);
                        col[r] = src[iy * g.w + ix];
                    }
                }
            }
        }
    }
}

void col2im_group(const std::vector<double>& cols, const ConvGeom& g, int group, Tensor& dx) {
    const int cing = g.cin / g.groups;
    const int K = cing * g.k * g.k;
    for (int oy = 0; oy < g.oh; ++oy) {
        for (int ox = 0; ox < g.ow; ++ox) {
            const double* col = cols.data() + (static_cast<size_t>(oy) * g.ow + ox) * K;
            int r = 0;
            for (int ci = 0; ci < cing; ++ci) {
                double* dst = dx.chan(group * cing + ci);
                for (int ky = 0; ky < g.k; ++ky) {
                    int iy = oy * g.stride + ky - g.pad;
                    if (g.mode == PadMode::Zero && (iy < 0 || iy >= g.h)) {
                        r += g.k;
                        continue;
                    }
                    iy = std::clamp(iy, 0, g.h - 1);
                    for (int kx = 0; kx < g.k; ++kx, ++r) {
                        int ix = ox * g.stride + kx - g.pad;
                        if (g.mode == PadMode::Zero && (ix < 0 || ix >= g.w)) continue;
                        ix = std::clamp(ix, 0, g.w - 1);
                        dst[iy * g.w + ix] += col[r];
                    }
                }
            }
        }
    }
}

}  // namespace

Value conv2d(const Value& x, const Value& w, const Value& b, int k, int stride, int pad, PadMode mode, int groups) {
    ConvGeom g;
    g.cin = x->val.c;
    g.k = k;
    g.stride = stride;
    g.pad = pad;
    g.groups = groups;
    g.h = x->val.h;
    g.w = x->val.w;
    g.mode = mode;
    g.cout = w->val.c;
    if (groups <= 0 || g.cin % groups != 0 || g.cout % groups != 0)
        throw std::invalid_argument("conv2d: channels not divisible by groups");
    const int cing = g.cin / groups;
    if (w->val.h != cing || w->val.w != k * k) throw std::invalid_argument("conv2d: weight shape mismatch");
    if (b && b->val.c != g.cout) throw std::invalid_argument("conv2d: bias shape mismatch");
    g.oh = (g.h + 2 * pad - k) / stride + 1;
    g.ow = (g.w + 2 * pad - k) / stride + 1;
    if (g.oh <= 0 || g.ow <= 0) throw std::invalid_argument("conv2d: empty output");

    const int K = cing * k * k;
    const int N = g.oh * g.ow;
    const int coutg = g.cout / groups;

    Tensor out(g.cout, g.oh, g.ow);
    std::vector<double> cols;
    for (int gi = 0; gi < groups; ++gi) {
        im2col_group(x->val, g, gi, cols);
        Eigen::Map<const ColMat> colm(cols.data(), K, N);
        Eigen::Map<const RowMat> wm(w->val.data() + static_cast<size_t>(gi) * coutg * K, coutg, K);
        Eigen::Map<RowMat> outm(out.data() + static_cast<size_t>(gi) * coutg * N, coutg, N);
        outm.noalias() = wm * colm;
    }
    if (b) {
        for (int c = 0; c < g.cout; ++c) {
            double* p = out.chan(c);
            const double bias = b->val.v[c];
            for (int i = 0; i < N; ++i) p[i] += bias;
        }
    }

    std::vector<Value> parents{x, w};
    if (b) parents.push_back(b);
    return make_node(std::move(out), std::move(parents), [x, w, b, g, K, N, coutg](Node& self) {
        std::vector<double> cols;
        std::vector<double> dcols;
        for (int gi = 0; gi < g.groups; ++gi) {
            Eigen::Map<const RowMat> goutm(self.grad.data() + static_cast<size_t>(gi) * coutg * N, coutg, N);
            if (w->requires_grad) {
                im2col_group(x->val, g, gi, cols);
                Eigen::Map<const ColMat> colm(cols.data(), K, N);
                w->ensure_grad();
                Eigen::Map<RowMat> dwm(w->grad.data() + static_cast<size_t>(gi) * coutg * K, coutg, K);
                dwm.noalias() += goutm * colm.transpose();
            }
            if (x->requires_grad) {
                Eigen::Map<const RowMat> wm(w->val.data() + static_cast<size_t>(gi) * coutg * K, coutg, K);
                dcols.assign(static_cast<size_t>(K) * N, 0.0);
                Eigen::Map<ColMat> dcolm(dcols.data(), K, N);
                dcolm.noalias() = wm.transpose() * goutm;
                x->ensure_grad();
                col2im_group(dcols, g, gi, x->grad);
            }
        }
        if (b && b->requires_grad) {
            b->ensure_grad();
            for (int c = 0; c < g.cout; ++c) {
                const double* gr = self.grad.chan(c);
                double acc = 0.0;
                for (int i = 0; i < N; ++i) acc += gr[i];
                b->grad.v[c] += acc;
            }
        }
    });
}

Value group_norm(const Value& x, const Value& gamma, const Value& beta, int groups, double eps) {
    const int c = x->val.c;
    if (groups <= 0 || c % groups != 0) throw std::invalid_argument("group_norm: channels not divisible by groups");
    if (gamma->val.c != c || beta->val.c != c) throw std::invalid_argument("group_norm: affine shape mismatch");
    const int per = c / groups;
    const int plane = x->val.plane();
    const size_t m = static_cast<size_t>(per) * plane;

    auto xhat = std::make_shared<Tensor>(c, x->val.h, x->val.w);
    auto inv_std = std::make_shared<std::vector<double>>(groups, 0.0);
    Tensor out(c, x->val.h, x->val.w);
    for (int g = 0; g < groups; ++g) {
        const double* base = x->val.chan(g * per);
        double s = 0.0, s2 = 0.0;
        for (size_t i = 0; i < m; ++i) {
            s += base[i];
            s2 += base[i] * base[i];
        }
        const double mu = s / m;
        const double var = std::max(0.0, s2 / m - mu * mu);
        const double istd = 1.0 / std::sqrt(var + eps);
        (*inv_std)[g] = istd;
        double* xh = xhat->chan(g * per);
        for (size_t i = 0; i < m; ++i) xh[i] = (base[i] - mu) * istd;
    }
    for (int ci = 0; ci < c; ++ci) {
        const double* xh = xhat->chan(ci);
        double* o = out.chan(ci);
        const double gm = gamma->val.v[ci], bt = beta->val.v[ci];
        for (int i = 0; i < plane; ++i) o[i] = gm * xh[i] + bt;
    }
    return make_node(std::move(out), {x, gamma, beta}, [x, gamma, beta, xhat, inv_std, groups, per, plane, m](Node& self) {
        if (gamma->requires_grad) {
            gamma->ensure_grad();
            for (int ci = 0; ci < self.val.c; ++ci) {
                const double* gr = self.grad.chan(ci);
                const double* xh = xhat->chan(ci);
                double acc = 0.0;
                for (int i = 0; i < plane; ++i) acc += gr[i] * xh[i];
                gamma->grad.v[ci] += acc;
            }
        }
        if (beta->requires_grad) {
            beta->ensure_grad();
            for (int ci = 0; ci < self.val.c; ++ci) {
                const double* gr = self.grad.chan(ci);
                double acc = 0.0;
                for (int i = 0; i < plane; ++i) acc += gr[i];
                beta->grad.v[ci] += acc;
            }
        }
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int g = 0; g < groups; ++g) {
            // dxhat = dy * gamma; dx = istd*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
            double mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (int j = 0; j < per; ++j) {
                const int ci = g * per + j;
                const double gm = gamma->val.v[ci];
                const double* gr = self.grad.chan(ci);
                const double* xh = xhat->chan(ci);
                for (int i = 0; i < plane; ++i) {
                    const double d = gr[i] * gm;
                    mean_dxh += d;
                    mean_dxh_xh += d * xh[i];
                }
            }
            mean_dxh /= static_cast<double>(m);
            mean_dxh_xh /= static_cast<double>(m);
            const double istd = (*inv_std)[g];
            for (int j = 0; j < per; ++j) {
                const int ci = g * per + j;
                const double gm = gamma->val.v[ci];
                const double* gr = self.grad.chan(ci);
                const double* xh = xhat->chan(ci);
                double* xg = x->grad.chan(ci);
                for (int i = 0; i < plane; ++i)
                    xg[i] += istd * (gr[i] * gm - mean_dxh - xh[i] * mean_dxh_xh);
            }
        }
    });
}

}  // namespace dmfuse::ad
