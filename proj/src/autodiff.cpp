#include "asymstereo/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace asymstereo {

namespace {

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using CMapRM = Eigen::Map<const MatrixRM>;

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(VarNode&)> back) {
    auto n = std::make_shared<VarNode>();
    n->val = std::move(value);
    bool req = false;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) {
        if (p.defined()) {
            req = req || p.node()->requires_grad;
            n->parents.push_back(p.node());
        }
    }
    n->requires_grad = req;
    if (req) n->backward_fn = std::move(back);
    return Var(std::move(n));
}

void ensure_grad(VarNode& n) {
    if (!n.grad_ready) {
        n.grad = Tensor(n.val.shape);
        n.grad_ready = true;
    }
}

// Accumulate g into parent's grad buffer if it participates.
void acc(const VarNodePtr& p, const std::function<void(Tensor&)>& add) {
    if (!p->requires_grad) return;
    ensure_grad(*p);
    add(p->grad);
}

int reflect_index(int i, int n) {
    // Symmetric reflection with edge duplication: -1 -> 0, -2 -> 1, n -> n-1.
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

}  // namespace

Var Var::leaf(Tensor value) {
    auto n = std::make_shared<VarNode>();
    n->val = std::move(value);
    n->requires_grad = true;
    return Var(std::move(n));
}

Var Var::constant(Tensor value) {
    auto n = std::make_shared<VarNode>();
    n->val = std::move(value);
    n->requires_grad = false;
    return Var(std::move(n));
}

void backward(const Var& root) {
    if (!root.defined() || root.val().size() != 1)
        throw std::invalid_argument("backward: root must be a defined scalar");

    // Post-order DFS gives a topological order (children after parents).
    std::vector<VarNode*> order;
    std::unordered_set<VarNode*> seen;
    std::vector<std::pair<VarNode*, std::size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            VarNode* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    ensure_grad(*root.node());
    root.node()->grad.v[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        VarNode* n = *it;
        if (n->backward_fn && n->grad_ready) n->backward_fn(*n);
    }
}

// ---- elementwise -----------------------------------------------------------

Var operator+(const Var& a, const Var& b) {
    require_same_shape(a.val(), b.val(), "add");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] += b.val().v[i];
    auto an = a.node(), bn = b.node();
    return make_node(std::move(out), {a, b}, [an, bn](VarNode& n) {
        acc(an, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i]; });
        acc(bn, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i]; });
    });
}

Var operator-(const Var& a, const Var& b) {
    require_same_shape(a.val(), b.val(), "sub");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] -= b.val().v[i];
    auto an = a.node(), bn = b.node();
    return make_node(std::move(out), {a, b}, [an, bn](VarNode& n) {
        acc(an, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i]; });
        acc(bn, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] -= n.grad.v[i]; });
    });
}

Var operator*(const Var& a, const Var& b) {
    require_same_shape(a.val(), b.val(), "mul");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= b.val().v[i];
    auto an = a.node(), bn = b.node();
    return make_node(std::move(out), {a, b}, [an, bn](VarNode& n) {
        acc(an, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i] * bn->val.v[i]; });
        acc(bn, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i] * an->val.v[i]; });
    });
}

Var operator/(const Var& a, const Var& b) {
    require_same_shape(a.val(), b.val(), "div");
    Tensor out = a.val();
    for (std::size_t i = 0; i < out.size(); ++i) out.v[i] /= b.val().v[i];
    auto an = a.node(), bn = b.node();
    return make_node(std::move(out), {a, b}, [an, bn](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i] / bn->val.v[i];
        });
        acc(bn, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double bv = bn->val.v[i];
                g.v[i] -= n.grad.v[i] * an->val.v[i] / (bv * bv);
            }
        });
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out = a.val();
    for (auto& x : out.v) x += s;
    auto an = a.node();
    return make_node(std::move(out), {a}, [an](VarNode& n) {
        acc(an, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i]; });
    });
}

Var mul_scalar(const Var& a, double s) {
    Tensor out = a.val();
    for (auto& x : out.v) x *= s;
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, s](VarNode& n) {
        acc(an, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += s * n.grad.v[i]; });
    });
}

Var vabs(const Var& a) {
    Tensor out = a.val();
    for (auto& x : out.v) x = std::abs(x);
    auto an = a.node();
    return make_node(std::move(out), {a}, [an](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double x = an->val.v[i];
                g.v[i] += n.grad.v[i] * (x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0));
            }
        });
    });
}

Var vexp(const Var& a) {
    Tensor out = a.val();
    for (auto& x : out.v) x = std::exp(x);
    auto an = a.node();
    return make_node(std::move(out), {a}, [an](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i] * n.val.v[i];
        });
    });
}

Var leaky_relu(const Var& a, double slope) {
    Tensor out = a.val();
    for (auto& x : out.v) x = x > 0 ? x : slope * x;
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, slope](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (std::size_t i = 0; i < g.size(); ++i)
                g.v[i] += n.grad.v[i] * (an->val.v[i] > 0 ? 1.0 : slope);
        });
    });
}

// ---- reductions ------------------------------------------------------------

Var mean_all(const Var& a) {
    double s = 0;
    for (double x : a.val().v) s += x;
    const double inv = 1.0 / static_cast<double>(a.val().size());
    auto an = a.node();
    return make_node(Tensor::scalar(s * inv), {a}, [an, inv](VarNode& n) {
        const double g0 = n.grad.v[0] * inv;
        acc(an, [&](Tensor& g) { for (auto& x : g.v) x += g0; });
    });
}

Var masked_mean(const Var& a, const std::vector<std::uint8_t>& mask) {
    const Tensor& t = a.val();
    std::size_t plane = t.size();
    int channels = 1;
    if (t.rank() == 3) {
        channels = t.shape[0];
        plane = static_cast<std::size_t>(t.shape[1]) * t.shape[2];
    } else if (t.rank() != 2) {
        throw std::invalid_argument("masked_mean: rank-2 or rank-3 input expected");
    }
    if (mask.size() != plane) throw std::invalid_argument("masked_mean: mask size mismatch");

    std::size_t cnt = 0;
    for (auto m : mask) cnt += m ? 1 : 0;
    if (cnt == 0) throw std::runtime_error("degenerate input: empty mask");

    double s = 0;
    for (int c = 0; c < channels; ++c) {
        const double* p = t.v.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i)
            if (mask[i]) s += p[i];
    }
    const double inv = 1.0 / (static_cast<double>(cnt) * channels);
    auto an = a.node();
    return make_node(Tensor::scalar(s * inv), {a}, [an, mask, inv, channels, plane](VarNode& n) {
        const double g0 = n.grad.v[0] * inv;
        acc(an, [&](Tensor& g) {
            for (int c = 0; c < channels; ++c) {
                double* p = g.v.data() + static_cast<std::size_t>(c) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    if (mask[i]) p[i] += g0;
            }
        });
    });
}

// ---- structure -------------------------------------------------------------

Var concat_channels(const Var& a, const Var& b) {
    const Tensor& ta = a.val();
    const Tensor& tb = b.val();
    if (ta.rank() != 3 || tb.rank() != 3 || ta.shape[1] != tb.shape[1] || ta.shape[2] != tb.shape[2])
        throw std::invalid_argument("concat_channels: [C,H,W] inputs with equal H,W expected");
    Tensor out({ta.shape[0] + tb.shape[0], ta.shape[1], ta.shape[2]});
    std::copy(ta.v.begin(), ta.v.end(), out.v.begin());
    std::copy(tb.v.begin(), tb.v.end(), out.v.begin() + static_cast<std::ptrdiff_t>(ta.size()));
    auto an = a.node(), bn = b.node();
    const std::size_t na = ta.size();
    return make_node(std::move(out), {a, b}, [an, bn, na](VarNode& n) {
        acc(an, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[i]; });
        acc(bn, [&](Tensor& g) { for (std::size_t i = 0; i < g.size(); ++i) g.v[i] += n.grad.v[na + i]; });
    });
}

Var shift_x_clamp(const Var& a, int shift) {
    const Tensor& t = a.val();
    if (t.rank() != 3) throw std::invalid_argument("shift_x_clamp: [C,H,W] expected");
    if (shift < 0) throw std::invalid_argument("shift_x_clamp: shift must be >= 0");
    const int C = t.shape[0], H = t.shape[1], W = t.shape[2];
    Tensor out(t.shape);
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x)
                out.at(c, y, x) = t.at(c, y, std::max(x - shift, 0));
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, shift, C, H, W](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H; ++y)
                    for (int x = 0; x < W; ++x)
                        g.at(c, y, std::max(x - shift, 0)) += n.grad.at(c, y, x);
        });
    });
}

Var stack_maps(const std::vector<Var>& slices) {
    if (slices.empty()) throw std::invalid_argument("stack_maps: empty input");
    int H = 0, W = 0;
    for (const auto& s : slices) {
        const Tensor& t = s.val();
        int h, w;
        if (t.rank() == 2) { h = t.shape[0]; w = t.shape[1]; }
        else if (t.rank() == 3 && t.shape[0] == 1) { h = t.shape[1]; w = t.shape[2]; }
        else throw std::invalid_argument("stack_maps: [H,W] or [1,H,W] slices expected");
        if (H == 0) { H = h; W = w; }
        else if (h != H || w != W) throw std::invalid_argument("stack_maps: slice shape mismatch");
    }
    const int D = static_cast<int>(slices.size());
    Tensor out({D, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int d = 0; d < D; ++d)
        std::copy(slices[d].val().v.begin(), slices[d].val().v.end(),
                  out.v.begin() + static_cast<std::ptrdiff_t>(d * plane));
    std::vector<VarNodePtr> nodes;
    for (const auto& s : slices) nodes.push_back(s.node());
    return make_node(std::move(out), {slices.begin(), slices.end()}, [nodes, plane](VarNode& n) {
        for (std::size_t d = 0; d < nodes.size(); ++d) {
            acc(nodes[d], [&](Tensor& g) {
                const double* src = n.grad.v.data() + d * plane;
                for (std::size_t i = 0; i < plane; ++i) g.v[i] += src[i];
            });
        }
    });
}

Var softmax_axis0(const Var& a) {
    const Tensor& t = a.val();
    if (t.rank() != 3) throw std::invalid_argument("softmax_axis0: [D,H,W] expected");
    const int D = t.shape[0], H = t.shape[1], W = t.shape[2];
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    Tensor out(t.shape);
    for (std::size_t i = 0; i < plane; ++i) {
        double m = t.v[i];
        for (int d = 1; d < D; ++d) m = std::max(m, t.v[d * plane + i]);
        double z = 0;
        for (int d = 0; d < D; ++d) {
            const double e = std::exp(t.v[d * plane + i] - m);
            out.v[d * plane + i] = e;
            z += e;
        }
        for (int d = 0; d < D; ++d) out.v[d * plane + i] /= z;
    }
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, D, plane](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (std::size_t i = 0; i < plane; ++i) {
                double dot = 0;
                for (int d = 0; d < D; ++d) dot += n.grad.v[d * plane + i] * n.val.v[d * plane + i];
                for (int d = 0; d < D; ++d)
                    g.v[d * plane + i] += n.val.v[d * plane + i] * (n.grad.v[d * plane + i] - dot);
            }
        });
    });
}

Var weighted_sum_axis0(const Var& a, const std::vector<double>& w) {
    const Tensor& t = a.val();
    if (t.rank() != 3) throw std::invalid_argument("weighted_sum_axis0: [D,H,W] expected");
    const int D = t.shape[0];
    if (static_cast<int>(w.size()) != D) throw std::invalid_argument("weighted_sum_axis0: weight count mismatch");
    const std::size_t plane = static_cast<std::size_t>(t.shape[1]) * t.shape[2];
    Tensor out({t.shape[1], t.shape[2]});
    for (int d = 0; d < D; ++d)
        for (std::size_t i = 0; i < plane; ++i) out.v[i] += w[d] * t.v[d * plane + i];
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, w, D, plane](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (int d = 0; d < D; ++d)
                for (std::size_t i = 0; i < plane; ++i) g.v[d * plane + i] += w[d] * n.grad.v[i];
        });
    });
}

Var diff_x(const Var& a) {
    const Tensor& t = a.val();
    if (t.rank() != 2) throw std::invalid_argument("diff_x: [H,W] expected");
    const int H = t.shape[0], W = t.shape[1];
    if (W < 2) throw std::invalid_argument("diff_x: width must be >= 2");
    Tensor out({H, W - 1});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x + 1 < W; ++x) out.at(y, x) = t.at(y, x + 1) - t.at(y, x);
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, H, W](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (int y = 0; y < H; ++y)
                for (int x = 0; x + 1 < W; ++x) {
                    g.at(y, x + 1) += n.grad.at(y, x);
                    g.at(y, x) -= n.grad.at(y, x);
                }
        });
    });
}

Var diff_y(const Var& a) {
    const Tensor& t = a.val();
    if (t.rank() != 2) throw std::invalid_argument("diff_y: [H,W] expected");
    const int H = t.shape[0], W = t.shape[1];
    if (H < 2) throw std::invalid_argument("diff_y: height must be >= 2");
    Tensor out({H - 1, W});
    for (int y = 0; y + 1 < H; ++y)
        for (int x = 0; x < W; ++x) out.at(y, x) = t.at(y + 1, x) - t.at(y, x);
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, H, W](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (int y = 0; y + 1 < H; ++y)
                for (int x = 0; x < W; ++x) {
                    g.at(y + 1, x) += n.grad.at(y, x);
                    g.at(y, x) -= n.grad.at(y, x);
                }
        });
    });
}

// ---- filtering -------------------------------------------------------------

Var reflect_pad2d(const Var& a, int pad) {
    const Tensor& t = a.val();
    if (t.rank() != 3) throw std::invalid_argument("reflect_pad2d: [C,H,W] expected");
    if (pad < 0) throw std::invalid_argument("reflect_pad2d: pad must be >= 0");
    const int C = t.shape[0], H = t.shape[1], W = t.shape[2];
    Tensor out({C, H + 2 * pad, W + 2 * pad});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H + 2 * pad; ++y) {
            const int sy = reflect_index(y - pad, H);
            for (int x = 0; x < W + 2 * pad; ++x)
                out.at(c, y, x) = t.at(c, sy, reflect_index(x - pad, W));
        }
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, pad, C, H, W](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < H + 2 * pad; ++y) {
                    const int sy = reflect_index(y - pad, H);
                    for (int x = 0; x < W + 2 * pad; ++x)
                        g.at(c, sy, reflect_index(x - pad, W)) += n.grad.at(c, y, x);
                }
        });
    });
}

Var box_mean_valid(const Var& a, int k) {
    const Tensor& t = a.val();
    if (t.rank() != 3) throw std::invalid_argument("box_mean_valid: [C,H,W] expected");
    const int C = t.shape[0], H = t.shape[1], W = t.shape[2];
    if (k < 1 || k > H || k > W) throw std::invalid_argument("box_mean_valid: bad window");
    const int Ho = H - k + 1, Wo = W - k + 1;
    const double inv = 1.0 / (static_cast<double>(k) * k);
    Tensor out({C, Ho, Wo});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < Ho; ++y)
            for (int x = 0; x < Wo; ++x) {
                double s = 0;
                for (int i = 0; i < k; ++i)
                    for (int j = 0; j < k; ++j) s += t.at(c, y + i, x + j);
                out.at(c, y, x) = s * inv;
            }
    auto an = a.node();
    return make_node(std::move(out), {a}, [an, k, C, Ho, Wo, inv](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (int c = 0; c < C; ++c)
                for (int y = 0; y < Ho; ++y)
                    for (int x = 0; x < Wo; ++x) {
                        const double gv = n.grad.at(c, y, x) * inv;
                        for (int i = 0; i < k; ++i)
                            for (int j = 0; j < k; ++j) g.at(c, y + i, x + j) += gv;
                    }
        });
    });
}

namespace {

// im2col for zero-padded strided convolution: output is [Ci*kh*kw, Ho*Wo].
void im2col(const Tensor& x, int kh, int kw, int stride, int pad, MatrixRM& col) {
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    col.resize(static_cast<Eigen::Index>(C) * kh * kw, static_cast<Eigen::Index>(Ho) * Wo);
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * kh + i) * kw + j;
                double* dst = col.data() + row * col.cols();
                for (int oy = 0; oy < Ho; ++oy) {
                    const int sy = oy * stride - pad + i;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int sx = ox * stride - pad + j;
                        dst[oy * Wo + ox] =
                            (sy >= 0 && sy < H && sx >= 0 && sx < W) ? x.at(c, sy, sx) : 0.0;
                    }
                }
            }
}

void col2im_add(const MatrixRM& col, int C, int H, int W, int kh, int kw, int stride, int pad,
                Tensor& out) {
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                const Eigen::Index row = (static_cast<Eigen::Index>(c) * kh + i) * kw + j;
                const double* src = col.data() + row * col.cols();
                for (int oy = 0; oy < Ho; ++oy) {
                    const int sy = oy * stride - pad + i;
                    if (sy < 0 || sy >= H) continue;
                    for (int ox = 0; ox < Wo; ++ox) {
                        const int sx = ox * stride - pad + j;
                        if (sx >= 0 && sx < W) out.at(c, sy, sx) += src[oy * Wo + ox];
                    }
                }
            }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    const Tensor& tx = x.val();
    const Tensor& tw = w.val();
    if (tx.rank() != 3 || tw.rank() != 4) throw std::invalid_argument("conv2d: x[Ci,H,W], w[Co,Ci,kh,kw] expected");
    const int Ci = tx.shape[0], H = tx.shape[1], W = tx.shape[2];
    const int Co = tw.shape[0], kh = tw.shape[2], kw = tw.shape[3];
    if (tw.shape[1] != Ci) throw std::invalid_argument("conv2d: channel mismatch");
    if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: bad stride/pad");
    const int Ho = (H + 2 * pad - kh) / stride + 1;
    const int Wo = (W + 2 * pad - kw) / stride + 1;
    if (Ho < 1 || Wo < 1) throw std::invalid_argument("conv2d: kernel larger than padded input");
    if (b.defined() && (b.val().rank() != 1 || b.val().shape[0] != Co))
        throw std::invalid_argument("conv2d: bias shape mismatch");

    MatrixRM col;
    im2col(tx, kh, kw, stride, pad, col);
    CMapRM wm(tw.v.data(), Co, static_cast<Eigen::Index>(Ci) * kh * kw);

    Tensor out({Co, Ho, Wo});
    MapRM om(out.v.data(), Co, static_cast<Eigen::Index>(Ho) * Wo);
    om.noalias() = wm * col;
    if (b.defined()) {
        for (int co = 0; co < Co; ++co) om.row(co).array() += b.val().v[co];
    }

    auto xn = x.node(), wn = w.node(), bn = b.defined() ? b.node() : nullptr;
    auto back = [xn, wn, bn, stride, pad, Ci, H, W, Co, kh, kw, Ho, Wo](VarNode& n) {
        CMapRM gm(n.grad.v.data(), Co, static_cast<Eigen::Index>(Ho) * Wo);
        // im2col is recomputed here instead of cached; GEMM dominates anyway.
        MatrixRM col2;
        im2col(xn->val, kh, kw, stride, pad, col2);
        if (wn->requires_grad) {
            ensure_grad(*wn);
            MapRM gw(wn->grad.v.data(), Co, static_cast<Eigen::Index>(Ci) * kh * kw);
            gw.noalias() += gm * col2.transpose();
        }
        if (bn && bn->requires_grad) {
            ensure_grad(*bn);
            for (int co = 0; co < Co; ++co) bn->grad.v[co] += gm.row(co).sum();
        }
        if (xn->requires_grad) {
            ensure_grad(*xn);
            CMapRM wm2(wn->val.v.data(), Co, static_cast<Eigen::Index>(Ci) * kh * kw);
            MatrixRM colg = wm2.transpose() * gm;
            col2im_add(colg, Ci, H, W, kh, kw, stride, pad, xn->grad);
        }
    };
    if (b.defined()) return make_node(std::move(out), {x, w, b}, std::move(back));
    return make_node(std::move(out), {x, w}, std::move(back));
}

// ---- resampling ------------------------------------------------------------

Var upsample_bilinear(const Var& a, int factor) {
    const Tensor& t = a.val();
    if (t.rank() != 2) throw std::invalid_argument("upsample_bilinear: [H,W] expected");
    if (factor < 1) throw std::invalid_argument("upsample_bilinear: factor must be >= 1");
    const int H = t.shape[0], W = t.shape[1];
    const int Ho = H * factor, Wo = W * factor;
    Tensor out({Ho, Wo});

    struct Taps { int i0, i1; double t; };
    auto make_taps = [factor](int n, int no) {
        std::vector<Taps> taps(static_cast<std::size_t>(no));
        for (int o = 0; o < no; ++o) {
            double u = (o + 0.5) / factor - 0.5;
            u = std::clamp(u, 0.0, static_cast<double>(n - 1));
            int i0 = static_cast<int>(std::floor(u));
            i0 = std::min(i0, n - 1);
            const int i1 = std::min(i0 + 1, n - 1);
            taps[o] = {i0, i1, u - i0};
        }
        return taps;
    };
    const auto ty = make_taps(H, Ho);
    const auto tx = make_taps(W, Wo);

    for (int y = 0; y < Ho; ++y)
        for (int x = 0; x < Wo; ++x) {
            const auto& py = ty[y];
            const auto& px = tx[x];
            out.at(y, x) = (1 - py.t) * ((1 - px.t) * t.at(py.i0, px.i0) + px.t * t.at(py.i0, px.i1)) +
                           py.t * ((1 - px.t) * t.at(py.i1, px.i0) + px.t * t.at(py.i1, px.i1));
        }

    auto an = a.node();
    return make_node(std::move(out), {a}, [an, ty, tx, Ho, Wo](VarNode& n) {
        acc(an, [&](Tensor& g) {
            for (int y = 0; y < Ho; ++y)
                for (int x = 0; x < Wo; ++x) {
                    const auto& py = ty[y];
                    const auto& px = tx[x];
                    const double gv = n.grad.at(y, x);
                    g.at(py.i0, px.i0) += gv * (1 - py.t) * (1 - px.t);
                    g.at(py.i0, px.i1) += gv * (1 - py.t) * px.t;
                    g.at(py.i1, px.i0) += gv * py.t * (1 - px.t);
                    g.at(py.i1, px.i1) += gv * py.t * px.t;
                }
        });
    });
}

Var warp_x(const Var& src, const Var& disp) {
    const Tensor& ts = src.val();
    const Tensor& td = disp.val();
    if (ts.rank() != 3 || td.rank() != 2) throw std::invalid_argument("warp_x: src[C,H,W], disp[H,W] expected");
    const int C = ts.shape[0], H = ts.shape[1], W = ts.shape[2];
    if (td.shape[0] != H || td.shape[1] != W) throw std::invalid_argument("warp_x: shape mismatch");

    Tensor out({C, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double xs = std::clamp(x - td.at(y, x), 0.0, static_cast<double>(W - 1));
            const int x0 = std::min(static_cast<int>(std::floor(xs)), W - 1);
            const int x1 = std::min(x0 + 1, W - 1);
            const double f = xs - x0;
            for (int c = 0; c < C; ++c)
                out.at(c, y, x) = (1 - f) * ts.at(c, y, x0) + f * ts.at(c, y, x1);
        }

    auto sn = src.node(), dn = disp.node();
    return make_node(std::move(out), {src, disp}, [sn, dn, C, H, W](VarNode& n) {
        const Tensor& ts2 = sn->val;
        const Tensor& td2 = dn->val;
        const bool need_s = sn->requires_grad;
        const bool need_d = dn->requires_grad;
        if (need_s) ensure_grad(*sn);
        if (need_d) ensure_grad(*dn);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double raw = x - td2.at(y, x);
                const bool interior = raw > 0.0 && raw < static_cast<double>(W - 1);
                const double xs = std::clamp(raw, 0.0, static_cast<double>(W - 1));
                const int x0 = std::min(static_cast<int>(std::floor(xs)), W - 1);
                const int x1 = std::min(x0 + 1, W - 1);
                const double f = xs - x0;
                for (int c = 0; c < C; ++c) {
                    const double gv = n.grad.at(c, y, x);
                    if (gv == 0.0) continue;
                    if (need_s) {
                        sn->grad.at(c, y, x0) += gv * (1 - f);
                        sn->grad.at(c, y, x1) += gv * f;
                    }
                    // d(out)/d(disp) = -(src[x1]-src[x0]); zero once clamped at the border.
                    if (need_d && interior)
                        dn->grad.at(y, x) -= gv * (ts2.at(c, y, x1) - ts2.at(c, y, x0));
                }
            }
    });
}

std::vector<std::uint8_t> warp_x_in_bounds(const Tensor& disp) {
    if (disp.rank() != 2) throw std::invalid_argument("warp_x_in_bounds: [H,W] expected");
    const int H = disp.shape[0], W = disp.shape[1];
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double xs = x - disp.at(y, x);
            mask[static_cast<std::size_t>(y) * W + x] =
                (xs >= 0.0 && xs <= static_cast<double>(W - 1)) ? 1 : 0;
        }
    return mask;
}

}  // namespace asymstereo
