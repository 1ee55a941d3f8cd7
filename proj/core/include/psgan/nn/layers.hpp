#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "psgan/errors.hpp"
#include "psgan/gemm.hpp"
#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan::nn {

/// Named view of one parameter tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
    std::string name;
    Tensor<T>* value = nullptr;
    Tensor<T>* grad = nullptr;
};

/// Named view of a persistent (checkpointed) tensor that is not optimized,
/// e.g. batch-norm running statistics.
template <typename T>
struct StateRef {
    std::string name;
    Tensor<T>* value = nullptr;
};

namespace detail {

inline int floor_div(int a, int b) {
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

inline int conv_out_dim(int in, int k, int stride, int pad) {
    return floor_div(in + 2 * pad - k, stride) + 1;
}

// Convolutions keep their configured padding unless that would produce an
// empty output (tiny inputs reaching the deep layers of the pedestrian
// discriminator); then the padding grows just enough for one output cell.
inline int effective_pad(int in, int k, int stride, int pad) {
    if (conv_out_dim(in, k, stride, pad) >= 1) return pad;
    return (k - in + 1) / 2;  // ceil((k - in) / 2)
}

// cols is (C*K*K) x (out_h*out_w), zero-filled where the window leaves the
// input.
template <typename T>
void im2col(const T* x, int c_in, int h, int w, int k, int stride, int pad_h,
            int pad_w, int out_h, int out_w, T* cols) {
    const int n_out = out_h * out_w;
    for (int c = 0; c < c_in; ++c) {
        const T* xc = x + static_cast<std::size_t>(c) * h * w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                T* row = cols + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * n_out;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad_h + ki;
                    if (iy < 0 || iy >= h) {
                        std::fill(row + oy * out_w, row + (oy + 1) * out_w, T(0));
                        continue;
                    }
                    const T* xrow = xc + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad_w + kj;
                        row[oy * out_w + ox] = (ix >= 0 && ix < w) ? xrow[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const T* cols, int c_in, int h, int w, int k, int stride,
                int pad_h, int pad_w, int out_h, int out_w, T* x) {
    const int n_out = out_h * out_w;
    for (int c = 0; c < c_in; ++c) {
        T* xc = x + static_cast<std::size_t>(c) * h * w;
        for (int ki = 0; ki < k; ++ki) {
            for (int kj = 0; kj < k; ++kj) {
                const T* row = cols + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * n_out;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad_h + ki;
                    if (iy < 0 || iy >= h) continue;
                    T* xrow = xc + static_cast<std::size_t>(iy) * w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad_w + kj;
                        if (ix >= 0 && ix < w) xrow[ix] += row[oy * out_w + ox];
                    }
                }
            }
        }
    }
}

}  // namespace detail

/// Strided 2-D convolution on a single (C,H,W) sample via im2col + GEMM.
template <typename T>
struct Conv2d {
    int in_ch = 0, out_ch = 0, ksize = 4, stride = 2, pad = 1;
    bool has_bias = true;
    Tensor<T> w, b;    // w: (out_ch, in_ch, k, k)
    Tensor<T> gw, gb;

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k, int s, int p, bool bias)
        : in_ch(in_c), out_ch(out_c), ksize(k), stride(s), pad(p), has_bias(bias) {
        w = Tensor<T>({out_ch, in_ch, ksize, ksize});
        gw = Tensor<T>(w.shape());
        if (has_bias) {
            b = Tensor<T>({out_ch});
            gb = Tensor<T>(b.shape());
        }
    }

    void init(Rng& rng) {
        for (std::size_t i = 0; i < w.numel(); ++i)
            w[i] = static_cast<T>(rng.normal(0.0, 0.02));
        if (has_bias) b.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.ndim() != 3 || x.dim(0) != in_ch)
            throw ShapeError("Conv2d: input " + x.shape_string() + ", expected " +
                             std::to_string(in_ch) + " channels");
        const int h = x.dim(1), wd = x.dim(2);
        pad_h_ = detail::effective_pad(h, ksize, stride, pad);
        pad_w_ = detail::effective_pad(wd, ksize, stride, pad);
        out_h_ = detail::conv_out_dim(h, ksize, stride, pad_h_);
        out_w_ = detail::conv_out_dim(wd, ksize, stride, pad_w_);
        x_ = x;

        const int kk = in_ch * ksize * ksize;
        const int n_out = out_h_ * out_w_;
        cols_.assign(static_cast<std::size_t>(kk) * n_out, T(0));
        detail::im2col(x.data(), in_ch, h, wd, ksize, stride, pad_h_, pad_w_,
                       out_h_, out_w_, cols_.data());

        Tensor<T> y({out_ch, out_h_, out_w_});
        gemm(false, false, out_ch, n_out, kk, T(1), w.data(), kk, cols_.data(),
             n_out, T(0), y.data(), n_out);
        if (has_bias)
            for (int c = 0; c < out_ch; ++c) {
                T* yc = y.data() + static_cast<std::size_t>(c) * n_out;
                for (int i = 0; i < n_out; ++i) yc[i] += b[c];
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const int kk = in_ch * ksize * ksize;
        const int n_out = out_h_ * out_w_;
        if (param_grads) {
            // gw += dy * cols^T
            gemm(false, true, out_ch, kk, n_out, T(1), dy.data(), n_out,
                 cols_.data(), n_out, T(1), gw.data(), kk);
            if (has_bias)
                for (int c = 0; c < out_ch; ++c) {
                    const T* dyc = dy.data() + static_cast<std::size_t>(c) * n_out;
                    T s = 0;
                    for (int i = 0; i < n_out; ++i) s += dyc[i];
                    gb[c] += s;
                }
        }
        // dcols = w^T * dy, then scatter back to input geometry.
        std::vector<T> dcols(static_cast<std::size_t>(kk) * n_out);
        gemm(true, false, kk, n_out, out_ch, T(1), w.data(), kk, dy.data(),
             n_out, T(0), dcols.data(), n_out);
        Tensor<T> dx(x_.shape());
        detail::col2im_add(dcols.data(), in_ch, x_.dim(1), x_.dim(2), ksize,
                           stride, pad_h_, pad_w_, out_h_, out_w_, dx.data());
        return dx;
    }

    void zero_grad() {
        gw.fill(T(0));
        if (has_bias) gb.fill(T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        if (has_bias) out.push_back({prefix + ".b", &b, &gb});
    }

private:
    Tensor<T> x_;
    std::vector<T> cols_;
    int pad_h_ = 0, pad_w_ = 0, out_h_ = 0, out_w_ = 0;
};

/// Fractionally-strided (transposed) convolution; upsamples by `stride`.
/// Weight layout (in_ch, out_ch, k, k), matching the adjoint of Conv2d.
template <typename T>
struct ConvTranspose2d {
    int in_ch = 0, out_ch = 0, ksize = 4, stride = 2, pad = 1;
    bool has_bias = true;
    Tensor<T> w, b;
    Tensor<T> gw, gb;

    ConvTranspose2d() = default;
    ConvTranspose2d(int in_c, int out_c, int k, int s, int p, bool bias)
        : in_ch(in_c), out_ch(out_c), ksize(k), stride(s), pad(p), has_bias(bias) {
        w = Tensor<T>({in_ch, out_ch, ksize, ksize});
        gw = Tensor<T>(w.shape());
        if (has_bias) {
            b = Tensor<T>({out_ch});
            gb = Tensor<T>(b.shape());
        }
    }

    void init(Rng& rng) {
        for (std::size_t i = 0; i < w.numel(); ++i)
            w[i] = static_cast<T>(rng.normal(0.0, 0.02));
        if (has_bias) b.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.ndim() != 3 || x.dim(0) != in_ch)
            throw ShapeError("ConvTranspose2d: input " + x.shape_string());
        const int h_in = x.dim(1), w_in = x.dim(2);
        out_h_ = (h_in - 1) * stride - 2 * pad + ksize;
        out_w_ = (w_in - 1) * stride - 2 * pad + ksize;
        x_ = x;

        const int kk = out_ch * ksize * ksize;
        const int n_in = h_in * w_in;
        // cols = w^T * x, then scatter-add with the forward-conv geometry of
        // the (output -> input) map.
        std::vector<T> cols(static_cast<std::size_t>(kk) * n_in);
        gemm(true, false, kk, n_in, in_ch, T(1), w.data(), kk, x.data(), n_in,
             T(0), cols.data(), n_in);
        Tensor<T> y({out_ch, out_h_, out_w_});
        detail::col2im_add(cols.data(), out_ch, out_h_, out_w_, ksize, stride,
                           pad, pad, h_in, w_in, y.data());
        if (has_bias)
            for (int c = 0; c < out_ch; ++c) {
                T* yc = y.data() + static_cast<std::size_t>(c) * out_h_ * out_w_;
                for (int i = 0; i < out_h_ * out_w_; ++i) yc[i] += b[c];
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const int h_in = x_.dim(1), w_in = x_.dim(2);
        const int kk = out_ch * ksize * ksize;
        const int n_in = h_in * w_in;
        std::vector<T> dcols(static_cast<std::size_t>(kk) * n_in);
        detail::im2col(dy.data(), out_ch, out_h_, out_w_, ksize, stride, pad,
                       pad, h_in, w_in, dcols.data());
        if (param_grads) {
            // gw += x * dcols^T
            gemm(false, true, in_ch, kk, n_in, T(1), x_.data(), n_in,
                 dcols.data(), n_in, T(1), gw.data(), kk);
            if (has_bias)
                for (int c = 0; c < out_ch; ++c) {
                    const T* dyc = dy.data() + static_cast<std::size_t>(c) * out_h_ * out_w_;
                    T s = 0;
                    for (int i = 0; i < out_h_ * out_w_; ++i) s += dyc[i];
                    gb[c] += s;
                }
        }
        Tensor<T> dx(x_.shape());
        gemm(false, false, in_ch, n_in, kk, T(1), w.data(), kk, dcols.data(),
             n_in, T(0), dx.data(), n_in);
        return dx;
    }

    void zero_grad() {
        gw.fill(T(0));
        if (has_bias) gb.fill(T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        if (has_bias) out.push_back({prefix + ".b", &b, &gb});
    }

private:
    Tensor<T> x_;
    int out_h_ = 0, out_w_ = 0;
};

/// Per-channel batch normalization over the spatial axes of one sample
/// (batch of one). Training mode normalizes with batch statistics and
/// maintains running averages; eval mode uses the running averages.
template <typename T>
struct BatchNorm2d {
    int ch = 0;
    T eps = T(1e-5);
    T momentum = T(0.1);
    Tensor<T> gamma, beta, ggamma, gbeta;
    Tensor<T> run_mean, run_var;

    BatchNorm2d() = default;
    explicit BatchNorm2d(int c) : ch(c) {
        gamma = Tensor<T>({ch});
        beta = Tensor<T>({ch});
        ggamma = Tensor<T>({ch});
        gbeta = Tensor<T>({ch});
        run_mean = Tensor<T>({ch});
        run_var = Tensor<T>::full({ch}, T(1));
    }

    void init(Rng& rng) {
        for (int c = 0; c < ch; ++c) gamma[c] = static_cast<T>(rng.normal(1.0, 0.02));
        beta.fill(T(0));
        run_mean.fill(T(0));
        run_var.fill(T(1));
    }

    Tensor<T> forward(const Tensor<T>& x, bool training) {
        if (x.dim(0) != ch) throw ShapeError("BatchNorm2d: channel mismatch");
        const int n = x.dim(1) * x.dim(2);
        Tensor<T> y(x.shape());
        train_mode_ = training;
        if (training) {
            xhat_ = Tensor<T>(x.shape());
            inv_sigma_.assign(ch, T(0));
            for (int c = 0; c < ch; ++c) {
                const T* xc = x.data() + static_cast<std::size_t>(c) * n;
                T mean = 0;
                for (int i = 0; i < n; ++i) mean += xc[i];
                mean /= n;
                T var = 0;
                for (int i = 0; i < n; ++i) {
                    const T d = xc[i] - mean;
                    var += d * d;
                }
                var /= n;
                const T inv = T(1) / std::sqrt(var + eps);
                inv_sigma_[c] = inv;
                T* hc = xhat_.data() + static_cast<std::size_t>(c) * n;
                T* yc = y.data() + static_cast<std::size_t>(c) * n;
                for (int i = 0; i < n; ++i) {
                    hc[i] = (xc[i] - mean) * inv;
                    yc[i] = gamma[c] * hc[i] + beta[c];
                }
                const T var_running = n > 1 ? var * T(n) / T(n - 1) : var;
                run_mean[c] = (T(1) - momentum) * run_mean[c] + momentum * mean;
                run_var[c] = (T(1) - momentum) * run_var[c] + momentum * var_running;
            }
        } else {
            for (int c = 0; c < ch; ++c) {
                const T scale = gamma[c] / std::sqrt(run_var[c] + eps);
                const T* xc = x.data() + static_cast<std::size_t>(c) * n;
                T* yc = y.data() + static_cast<std::size_t>(c) * n;
                for (int i = 0; i < n; ++i)
                    yc[i] = scale * (xc[i] - run_mean[c]) + beta[c];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        const int n = dy.dim(1) * dy.dim(2);
        Tensor<T> dx(dy.shape());
        if (!train_mode_) {
            for (int c = 0; c < ch; ++c) {
                const T scale = gamma[c] / std::sqrt(run_var[c] + eps);
                const T* dyc = dy.data() + static_cast<std::size_t>(c) * n;
                T* dxc = dx.data() + static_cast<std::size_t>(c) * n;
                for (int i = 0; i < n; ++i) dxc[i] = dyc[i] * scale;
            }
            return dx;
        }
        for (int c = 0; c < ch; ++c) {
            const T* dyc = dy.data() + static_cast<std::size_t>(c) * n;
            const T* hc = xhat_.data() + static_cast<std::size_t>(c) * n;
            T sum_dy = 0, sum_dy_h = 0;
            for (int i = 0; i < n; ++i) {
                sum_dy += dyc[i];
                sum_dy_h += dyc[i] * hc[i];
            }
            if (param_grads) {
                gbeta[c] += sum_dy;
                ggamma[c] += sum_dy_h;
            }
            const T k = gamma[c] * inv_sigma_[c] / T(n);
            T* dxc = dx.data() + static_cast<std::size_t>(c) * n;
            for (int i = 0; i < n; ++i)
                dxc[i] = k * (T(n) * dyc[i] - sum_dy - hc[i] * sum_dy_h);
        }
        return dx;
    }

    void zero_grad() {
        ggamma.fill(T(0));
        gbeta.fill(T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".gamma", &gamma, &ggamma});
        out.push_back({prefix + ".beta", &beta, &gbeta});
    }

    void collect_state(const std::string& prefix, std::vector<StateRef<T>>& out) {
        out.push_back({prefix + ".run_mean", &run_mean});
        out.push_back({prefix + ".run_var", &run_var});
    }

private:
    Tensor<T> xhat_;
    std::vector<T> inv_sigma_;
    bool train_mode_ = true;
};

template <typename T>
struct LeakyReLU {
    T slope = T(0.2);

    LeakyReLU() = default;
    explicit LeakyReLU(T s) : slope(s) {}

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i)
            y[i] = x[i] > T(0) ? x[i] : slope * x[i];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) const {
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx[i] = x_[i] > T(0) ? dy[i] : slope * dy[i];
        return dx;
    }

private:
    Tensor<T> x_;
};

template <typename T>
struct ReLU {
    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) y[i] = std::max(x[i], T(0));
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) const {
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx[i] = x_[i] > T(0) ? dy[i] : T(0);
        return dx;
    }

private:
    Tensor<T> x_;
};

template <typename T>
struct Tanh {
    Tensor<T> forward(const Tensor<T>& x) {
        y_ = Tensor<T>(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i) y_[i] = std::tanh(x[i]);
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy) const {
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx[i] = dy[i] * (T(1) - y_[i] * y_[i]);
        return dx;
    }

private:
    Tensor<T> y_;
};

template <typename T>
struct Sigmoid {
    Tensor<T> forward(const Tensor<T>& x) {
        y_ = Tensor<T>(x.shape());
        for (std::size_t i = 0; i < x.numel(); ++i)
            y_[i] = T(1) / (T(1) + std::exp(-x[i]));
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy) const {
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.numel(); ++i)
            dx[i] = dy[i] * y_[i] * (T(1) - y_[i]);
        return dx;
    }

private:
    Tensor<T> y_;
};

/// Fully connected layer on a flat vector.
template <typename T>
struct Linear {
    int in_dim = 0, out_dim = 0;
    Tensor<T> w, b, gw, gb;  // w: (out_dim, in_dim)

    Linear() = default;
    Linear(int in_d, int out_d) : in_dim(in_d), out_dim(out_d) {
        w = Tensor<T>({out_dim, in_dim});
        b = Tensor<T>({out_dim});
        gw = Tensor<T>(w.shape());
        gb = Tensor<T>(b.shape());
    }

    void init(Rng& rng) {
        for (std::size_t i = 0; i < w.numel(); ++i)
            w[i] = static_cast<T>(rng.normal(0.0, 0.02));
        b.fill(T(0));
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (static_cast<int>(x.numel()) != in_dim)
            throw ShapeError("Linear: input size " + std::to_string(x.numel()) +
                             ", want " + std::to_string(in_dim));
        x_ = x;
        Tensor<T> y({out_dim});
        for (int o = 0; o < out_dim; ++o) {
            const T* wo = w.data() + static_cast<std::size_t>(o) * in_dim;
            T s = b[o];
            for (int i = 0; i < in_dim; ++i) s += wo[i] * x[i];
            y[o] = s;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool param_grads = true) {
        Tensor<T> dx({in_dim});
        for (int o = 0; o < out_dim; ++o) {
            const T* wo = w.data() + static_cast<std::size_t>(o) * in_dim;
            T* gwo = gw.data() + static_cast<std::size_t>(o) * in_dim;
            if (param_grads) {
                gb[o] += dy[o];
                for (int i = 0; i < in_dim; ++i) gwo[i] += dy[o] * x_[i];
            }
            for (int i = 0; i < in_dim; ++i) dx[i] += wo[i] * dy[o];
        }
        return dx;
    }

    void zero_grad() {
        gw.fill(T(0));
        gb.fill(T(0));
    }

    void collect(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".w", &w, &gw});
        out.push_back({prefix + ".b", &b, &gb});
    }

private:
    Tensor<T> x_;
};

}  // namespace psgan::nn
