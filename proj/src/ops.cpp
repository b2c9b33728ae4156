#include "edip/ops.hpp"

#include <algorithm>
#include <cmath>

namespace edip {

namespace {

void check_finite(const char* op, const std::vector<double>& v) {
    if (!check_finite_enabled()) return;
    for (double x : v)
        if (!std::isfinite(x)) throw Error(std::string(op) + ": non-finite value in output");
}

bool wants_grad(const Tensor& t) { return t.defined() && t.node()->on_tape; }

}  // namespace

namespace detail {

// Attach parents/backward rule and record on the active tape when any input
// participates in gradient computation.
void finalize_op(const char* op, Tensor& result, std::vector<Tensor> inputs,
                 std::function<void(Node&)> backward) {
    check_finite(op, result.data());
    Tape* tape = Tape::active();
    if (!NoGradGuard::grad_enabled()) return;
    bool track = false;
    for (const auto& t : inputs) track = track || wants_grad(t);
    if (!track || !tape) return;
    Node* n = result.node().get();
    n->on_tape = true;
    for (auto& t : inputs)
        if (t.defined()) n->parents.push_back(t.node());
    n->backward_fn = std::move(backward);
    tape->record(result.node());
}

}  // namespace detail

using detail::finalize_op;

static void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.data());
    const auto& bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] += bd[i];
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    auto an = a.node(), bn = b.node();
    finalize_op("add", r, {a, b}, [an, bn](Node& n) {
        if (an->on_tape) {
            an->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->on_tape) {
            bn->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i];
        }
    });
    return r;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.data());
    const auto& bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] -= bd[i];
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    auto an = a.node(), bn = b.node();
    finalize_op("sub", r, {a, b}, [an, bn](Node& n) {
        if (an->on_tape) {
            an->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
        }
        if (bn->on_tape) {
            bn->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] -= n.grad[i];
        }
    });
    return r;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.data());
    const auto& bd = b.data();
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bd[i];
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    auto an = a.node(), bn = b.node();
    finalize_op("mul", r, {a, b}, [an, bn](Node& n) {
        if (an->on_tape) {
            an->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i] * bn->value[i];
        }
        if (bn->on_tape) {
            bn->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) bn->grad[i] += n.grad[i] * an->value[i];
        }
    });
    return r;
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (double& x : out) x *= c;
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    auto an = a.node();
    finalize_op("scale", r, {a}, [an, c](Node& n) {
        if (!an->on_tape) return;
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += c * n.grad[i];
    });
    return r;
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (double& x : out) x += c;
    Tensor r = Tensor::from_data(a.shape(), std::move(out));
    auto an = a.node();
    finalize_op("add_scalar", r, {a}, [an](Node& n) {
        if (!an->on_tape) return;
        an->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) an->grad[i] += n.grad[i];
    });
    return r;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int64_t m = a.dim(0), k = a.dim(1), n2 = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n2), 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (int64_t i = 0; i < m; ++i)
        for (int64_t l = 0; l < k; ++l) {
            double av = A[i * k + l];
            for (int64_t j = 0; j < n2; ++j) out[i * n2 + j] += av * B[l * n2 + j];
        }
    Tensor r = Tensor::from_data({m, n2}, std::move(out));
    auto an = a.node(), bn = b.node();
    finalize_op("matmul", r, {a, b}, [an, bn, m, k, n2](Node& n) {
        const double* G = n.grad.data();
        if (an->on_tape) {  // dA = G * B^T
            an->ensure_grad();
            const double* B = bn->value.data();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t j = 0; j < n2; ++j) {
                    double g = G[i * n2 + j];
                    for (int64_t l = 0; l < k; ++l) an->grad[i * k + l] += g * B[l * n2 + j];
                }
        }
        if (bn->on_tape) {  // dB = A^T * G
            bn->ensure_grad();
            const double* A = an->value.data();
            for (int64_t i = 0; i < m; ++i)
                for (int64_t l = 0; l < k; ++l) {
                    double av = A[i * k + l];
                    for (int64_t j = 0; j < n2; ++j) bn->grad[l * n2 + j] += av * G[i * n2 + j];
                }
        }
    });
    return r;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int padding) {
    if (input.rank() != 3 || kernel.rank() != 4)
        throw ShapeError("conv2d: expected input rank 3 and kernel rank 4, got " +
                         shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
    const int64_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int64_t cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != cin)
        throw ShapeError("conv2d: kernel expects " + std::to_string(kernel.dim(1)) +
                         " input channels, input has " + std::to_string(cin));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != cout))
        throw ShapeError("conv2d: bias shape " + shape_str(bias.shape()) + " does not match " +
                         std::to_string(cout) + " output channels");
    const int64_t oh = (h + 2 * padding - kh) / stride + 1;
    const int64_t ow = (w + 2 * padding - kw) / stride + 1;
    if (oh < 1 || ow < 1) throw ShapeError("conv2d: empty output");

    std::vector<double> out(static_cast<size_t>(cout * oh * ow), 0.0);
    const double* in = input.data().data();
    const double* K = kernel.data().data();
    const int s = stride, p = padding;
    for (int64_t oc = 0; oc < cout; ++oc)
        for (int64_t ic = 0; ic < cin; ++ic)
            for (int64_t ky = 0; ky < kh; ++ky)
                for (int64_t kx = 0; kx < kw; ++kx) {
                    const double wv = K[((oc * cin + ic) * kh + ky) * kw + kx];
                    if (wv == 0.0) continue;
                    for (int64_t oy = 0; oy < oh; ++oy) {
                        const int64_t iy = oy * s + ky - p;
                        if (iy < 0 || iy >= h) continue;
                        // ox range with ix = ox*s + kx - p inside [0, w)
                        int64_t lo = 0, hi = ow;
                        while (lo < hi && lo * s + kx - p < 0) ++lo;
                        while (hi > lo && (hi - 1) * s + kx - p >= w) --hi;
                        const double* irow = in + (ic * h + iy) * w + kx - p;
                        double* orow = out.data() + (oc * oh + oy) * ow;
                        for (int64_t ox = lo; ox < hi; ++ox) orow[ox] += wv * irow[ox * s];
                    }
                }
    if (bias.defined()) {
        const double* bd = bias.data().data();
        for (int64_t oc = 0; oc < cout; ++oc)
            for (int64_t i = 0; i < oh * ow; ++i) out[oc * oh * ow + i] += bd[oc];
    }
    Tensor r = Tensor::from_data({cout, oh, ow}, std::move(out));
    auto in_n = input.node(), k_n = kernel.node();
    auto b_n = bias.defined() ? bias.node() : nullptr;
    finalize_op("conv2d", r, {input, kernel, bias},
                [in_n, k_n, b_n, cin, h, w, cout, kh, kw, oh, ow, s, p](Node& n) {
                    const double* G = n.grad.data();
                    if (b_n && b_n->on_tape) {
                        b_n->ensure_grad();
                        for (int64_t oc = 0; oc < cout; ++oc) {
                            double acc = 0.0;
                            for (int64_t i = 0; i < oh * ow; ++i) acc += G[oc * oh * ow + i];
                            b_n->grad[oc] += acc;
                        }
                    }
                    const double* in = in_n->value.data();
                    const double* K = k_n->value.data();
                    const bool gi = in_n->on_tape, gk = k_n->on_tape;
                    if (gi) in_n->ensure_grad();
                    if (gk) k_n->ensure_grad();
                    if (!gi && !gk) return;
                    for (int64_t oc = 0; oc < cout; ++oc)
                        for (int64_t ic = 0; ic < cin; ++ic)
                            for (int64_t ky = 0; ky < kh; ++ky)
                                for (int64_t kx = 0; kx < kw; ++kx) {
                                    const int64_t kidx = ((oc * cin + ic) * kh + ky) * kw + kx;
                                    const double wv = K[kidx];
                                    double wacc = 0.0;
                                    for (int64_t oy = 0; oy < oh; ++oy) {
                                        const int64_t iy = oy * s + ky - p;
                                        if (iy < 0 || iy >= h) continue;
                                        int64_t lo = 0, hi = ow;
                                        while (lo < hi && lo * s + kx - p < 0) ++lo;
                                        while (hi > lo && (hi - 1) * s + kx - p >= w) --hi;
                                        const double* grow = G + (oc * oh + oy) * ow;
                                        const int64_t base = (ic * h + iy) * w + kx - p;
                                        if (gk) {
                                            const double* irow = in + base;
                                            for (int64_t ox = lo; ox < hi; ++ox)
                                                wacc += grow[ox] * irow[ox * s];
                                        }
                                        if (gi) {
                                            double* girow = in_n->grad.data() + base;
                                            for (int64_t ox = lo; ox < hi; ++ox)
                                                girow[ox * s] += wv * grow[ox];
                                        }
                                    }
                                    if (gk) k_n->grad[kidx] += wacc;
                                }
                });
    return r;
}

Tensor bilinear_upsample_2x(const Tensor& input) {
    if (input.rank() != 3)
        throw ShapeError("bilinear_upsample_2x: expected rank 3, got " + shape_str(input.shape()));
    const int64_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int64_t oh = 2 * h, ow = 2 * w;
    // Precompute 1-D sampling stencils: src = (o + 0.5)/2 - 0.5, clamped.
    auto stencil = [](int64_t o, int64_t n, int64_t& i0, int64_t& i1, double& w1) {
        double src = (o + 0.5) * 0.5 - 0.5;
        if (src < 0) src = 0;
        if (src > n - 1) src = static_cast<double>(n - 1);
        i0 = static_cast<int64_t>(src);
        if (i0 > n - 2) i0 = std::max<int64_t>(0, n - 2);
        i1 = std::min(i0 + 1, n - 1);
        w1 = src - i0;
    };
    std::vector<int64_t> y0(oh), y1(oh), x0(ow), x1(ow);
    std::vector<double> wy(oh), wx(ow);
    for (int64_t o = 0; o < oh; ++o) stencil(o, h, y0[o], y1[o], wy[o]);
    for (int64_t o = 0; o < ow; ++o) stencil(o, w, x0[o], x1[o], wx[o]);

    std::vector<double> out(static_cast<size_t>(c * oh * ow));
    const double* in = input.data().data();
    for (int64_t ch = 0; ch < c; ++ch) {
        const double* plane = in + ch * h * w;
        double* oplane = out.data() + ch * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
                double v00 = plane[y0[oy] * w + x0[ox]];
                double v01 = plane[y0[oy] * w + x1[ox]];
                double v10 = plane[y1[oy] * w + x0[ox]];
                double v11 = plane[y1[oy] * w + x1[ox]];
                double top = v00 + wx[ox] * (v01 - v00);
                double bot = v10 + wx[ox] * (v11 - v10);
                oplane[oy * ow + ox] = top + wy[oy] * (bot - top);
            }
    }
    Tensor r = Tensor::from_data({c, oh, ow}, std::move(out));
    auto in_n = input.node();
    finalize_op("bilinear_upsample_2x", r, {input},
                [in_n, c, h, w, oh, ow, y0, y1, x0, x1, wy, wx](Node& n) {
                    if (!in_n->on_tape) return;
                    in_n->ensure_grad();
                    const double* G = n.grad.data();
                    for (int64_t ch = 0; ch < c; ++ch) {
                        double* gplane = in_n->grad.data() + ch * h * w;
                        const double* gout = G + ch * oh * ow;
                        for (int64_t oy = 0; oy < oh; ++oy)
                            for (int64_t ox = 0; ox < ow; ++ox) {
                                const double g = gout[oy * ow + ox];
                                const double a = wy[oy], b = wx[ox];
                                gplane[y0[oy] * w + x0[ox]] += (1 - a) * (1 - b) * g;
                                gplane[y0[oy] * w + x1[ox]] += (1 - a) * b * g;
                                gplane[y1[oy] * w + x0[ox]] += a * (1 - b) * g;
                                gplane[y1[oy] * w + x1[ox]] += a * b * g;
                            }
                    }
                });
    return r;
}

Tensor leaky_relu(const Tensor& x, double slope) {
    std::vector<double> out(x.data());
    for (double& v : out)
        if (v < 0) v *= slope;
    Tensor r = Tensor::from_data(x.shape(), std::move(out));
    auto xn = x.node();
    finalize_op("leaky_relu", r, {x}, [xn, slope](Node& n) {
        if (!xn->on_tape) return;
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            xn->grad[i] += n.grad[i] * (xn->value[i] >= 0 ? 1.0 : slope);
    });
    return r;
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.data());
    for (double& v : out) v = 1.0 / (1.0 + std::exp(-v));
    Tensor r = Tensor::from_data(x.shape(), std::move(out));
    auto xn = x.node();
    // the output value lives in the node handed to the backward rule;
    // capturing the result's shared_ptr here would create a retain cycle
    finalize_op("sigmoid", r, {x}, [xn](Node& n) {
        if (!xn->on_tape) return;
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            double y = n.value[i];
            xn->grad[i] += n.grad[i] * y * (1.0 - y);
        }
    });
    return r;
}

Tensor group_norm(const Tensor& x, int num_groups, const Tensor& gain, const Tensor& bias,
                  double epsilon) {
    if (x.rank() != 3) throw ShapeError("group_norm: expected rank 3, got " + shape_str(x.shape()));
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    if (num_groups < 1 || c % num_groups != 0)
        throw ShapeError("group_norm: " + std::to_string(c) + " channels not divisible by " +
                         std::to_string(num_groups) + " groups");
    if (gain.numel() != c || bias.numel() != c)
        throw ShapeError("group_norm: gain/bias must have one entry per channel");
    const int64_t cpg = c / num_groups, gsz = cpg * h * w, hw = h * w;

    auto xhat = std::make_shared<std::vector<double>>(x.data().size());
    auto inv_std = std::make_shared<std::vector<double>>(num_groups);
    std::vector<double> out(x.data().size());
    const double* in = x.data().data();
    const double* gd = gain.data().data();
    const double* bd = bias.data().data();
    for (int64_t g = 0; g < num_groups; ++g) {
        const double* seg = in + g * gsz;
        double mu = 0.0;
        for (int64_t i = 0; i < gsz; ++i) mu += seg[i];
        mu /= gsz;
        double var = 0.0;
        for (int64_t i = 0; i < gsz; ++i) {
            double d = seg[i] - mu;
            var += d * d;
        }
        var /= gsz;
        const double is = 1.0 / std::sqrt(var + epsilon);
        (*inv_std)[g] = is;
        for (int64_t i = 0; i < gsz; ++i) {
            double xh = (seg[i] - mu) * is;
            (*xhat)[g * gsz + i] = xh;
            const int64_t ch = g * cpg + i / hw;
            out[g * gsz + i] = gd[ch] * xh + bd[ch];
        }
    }
    Tensor r = Tensor::from_data(x.shape(), std::move(out));
    auto xn = x.node(), gn = gain.node(), bn = bias.node();
    finalize_op("group_norm", r, {x, gain, bias},
                [xn, gn, bn, xhat, inv_std, num_groups, cpg, gsz, hw](Node& n) {
                    const double* G = n.grad.data();
                    const double* xh = xhat->data();
                    if (gn->on_tape) gn->ensure_grad();
                    if (bn->on_tape) bn->ensure_grad();
                    for (int64_t g = 0; g < num_groups; ++g) {
                        const int64_t off = g * gsz;
                        if (gn->on_tape || bn->on_tape) {
                            for (int64_t cc = 0; cc < cpg; ++cc) {
                                const int64_t ch = g * cpg + cc;
                                double sg = 0.0, sb = 0.0;
                                for (int64_t i = 0; i < hw; ++i) {
                                    const int64_t idx = off + cc * hw + i;
                                    sg += G[idx] * xh[idx];
                                    sb += G[idx];
                                }
                                if (gn->on_tape) gn->grad[ch] += sg;
                                if (bn->on_tape) bn->grad[ch] += sb;
                            }
                        }
                        if (!xn->on_tape) continue;
                        xn->ensure_grad();
                        // dxhat = G * gain(channel); project out mean and xhat component
                        double m1 = 0.0, m2 = 0.0;
                        for (int64_t i = 0; i < gsz; ++i) {
                            const int64_t ch = g * cpg + i / hw;
                            const double dxh = G[off + i] * gn->value[ch];
                            m1 += dxh;
                            m2 += dxh * xh[off + i];
                        }
                        m1 /= gsz;
                        m2 /= gsz;
                        const double is = (*inv_std)[g];
                        for (int64_t i = 0; i < gsz; ++i) {
                            const int64_t ch = g * cpg + i / hw;
                            const double dxh = G[off + i] * gn->value[ch];
                            xn->grad[off + i] += is * (dxh - m1 - xh[off + i] * m2);
                        }
                    }
                });
    return r;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(1) != b.dim(1) || a.dim(2) != b.dim(2))
        throw ShapeError("concat_channels: incompatible shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const int64_t ca = a.dim(0), cb = b.dim(0), hw = a.dim(1) * a.dim(2);
    std::vector<double> out;
    out.reserve(static_cast<size_t>((ca + cb) * hw));
    out.insert(out.end(), a.data().begin(), a.data().end());
    out.insert(out.end(), b.data().begin(), b.data().end());
    Tensor r = Tensor::from_data({ca + cb, a.dim(1), a.dim(2)}, std::move(out));
    auto an = a.node(), bn = b.node();
    finalize_op("concat_channels", r, {a, b}, [an, bn, ca, hw](Node& n) {
        const size_t na = static_cast<size_t>(ca * hw);
        if (an->on_tape) {
            an->ensure_grad();
            for (size_t i = 0; i < na; ++i) an->grad[i] += n.grad[i];
        }
        if (bn->on_tape) {
            bn->ensure_grad();
            for (size_t i = 0; i < bn->grad.size(); ++i) bn->grad[i] += n.grad[na + i];
        }
    });
    return r;
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (numel(new_shape) != x.numel())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(new_shape));
    Tensor r = Tensor::from_data(std::move(new_shape), x.data());
    auto xn = x.node();
    finalize_op("reshape", r, {x}, [xn](Node& n) {
        if (!xn->on_tape) return;
        xn->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) xn->grad[i] += n.grad[i];
    });
    return r;
}

static Tensor diff_last(const Tensor& x, bool horizontal) {
    if (x.rank() < 2)
        throw ShapeError("diff: expected rank >= 2, got " + shape_str(x.shape()));
    const int r = x.rank();
    const int64_t h = x.dim(r - 2), w = x.dim(r - 1);
    int64_t planes = x.numel() / (h * w);
    Shape os = x.shape();
    if (horizontal)
        os[r - 1] = w - 1;
    else
        os[r - 2] = h - 1;
    const int64_t ohh = horizontal ? h : h - 1, oww = horizontal ? w - 1 : w;
    std::vector<double> out(static_cast<size_t>(planes * ohh * oww));
    const double* in = x.data().data();
    for (int64_t pl = 0; pl < planes; ++pl)
        for (int64_t y = 0; y < ohh; ++y)
            for (int64_t xx = 0; xx < oww; ++xx) {
                const int64_t base = pl * h * w;
                double d = horizontal ? in[base + y * w + xx + 1] - in[base + y * w + xx]
                                      : in[base + (y + 1) * w + xx] - in[base + y * w + xx];
                out[(pl * ohh + y) * oww + xx] = d;
            }
    Tensor res = Tensor::from_data(std::move(os), std::move(out));
    auto xn = x.node();
    finalize_op(horizontal ? "diff_h" : "diff_v", res, {x},
                [xn, planes, h, w, ohh, oww, horizontal](Node& n) {
                    if (!xn->on_tape) return;
                    xn->ensure_grad();
                    const double* G = n.grad.data();
                    for (int64_t pl = 0; pl < planes; ++pl)
                        for (int64_t y = 0; y < ohh; ++y)
                            for (int64_t xx = 0; xx < oww; ++xx) {
                                const double g = G[(pl * ohh + y) * oww + xx];
                                const int64_t base = pl * h * w;
                                if (horizontal) {
                                    xn->grad[base + y * w + xx + 1] += g;
                                    xn->grad[base + y * w + xx] -= g;
                                } else {
                                    xn->grad[base + (y + 1) * w + xx] += g;
                                    xn->grad[base + y * w + xx] -= g;
                                }
                            }
                });
    return res;
}

Tensor diff_h(const Tensor& x) { return diff_last(x, true); }
Tensor diff_v(const Tensor& x) { return diff_last(x, false); }

Tensor l1_norm(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += std::abs(v);
    Tensor r = Tensor::from_data({1}, {acc});
    auto xn = x.node();
    finalize_op("l1_norm", r, {x}, [xn](Node& n) {
        if (!xn->on_tape) return;
        xn->ensure_grad();
        const double g = n.grad[0];
        for (size_t i = 0; i < xn->grad.size(); ++i) {
            double v = xn->value[i];
            xn->grad[i] += g * (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
        }
    });
    return r;
}

Tensor l2_norm_sq(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v * v;
    Tensor r = Tensor::from_data({1}, {acc});
    auto xn = x.node();
    finalize_op("l2_norm_sq", r, {x}, [xn](Node& n) {
        if (!xn->on_tape) return;
        xn->ensure_grad();
        const double g = n.grad[0];
        for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += 2.0 * g * xn->value[i];
    });
    return r;
}

Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    Tensor r = Tensor::from_data({1}, {acc});
    auto xn = x.node();
    finalize_op("sum", r, {x}, [xn](Node& n) {
        if (!xn->on_tape) return;
        xn->ensure_grad();
        const double g = n.grad[0];
        for (size_t i = 0; i < xn->grad.size(); ++i) xn->grad[i] += g;
    });
    return r;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

}  // namespace edip
