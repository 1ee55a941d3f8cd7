#include <doctest.h>

#include "psgan/nn/layers.hpp"
#include "test_util.hpp"

using namespace psgan;
using testutil::random_tensor;

namespace {

// Direct six-loop convolution, the independent reference for the
// im2col+GEMM path.
Tensor<double> conv_reference(const Tensor<double>& x, const Tensor<double>& w,
                              const Tensor<double>* b, int stride, int pad_h, int pad_w) {
    const int c_out = w.dim(0), c_in = w.dim(1), k = w.dim(2);
    const int out_h = nn::detail::conv_out_dim(x.dim(1), k, stride, pad_h);
    const int out_w = nn::detail::conv_out_dim(x.dim(2), k, stride, pad_w);
    Tensor<double> y({c_out, out_h, out_w});
    for (int co = 0; co < c_out; ++co)
        for (int oy = 0; oy < out_h; ++oy)
            for (int ox = 0; ox < out_w; ++ox) {
                double s = b ? (*b)[co] : 0.0;
                for (int ci = 0; ci < c_in; ++ci)
                    for (int ki = 0; ki < k; ++ki)
                        for (int kj = 0; kj < k; ++kj) {
                            const int iy = oy * stride - pad_h + ki;
                            const int ix = ox * stride - pad_w + kj;
                            if (iy >= 0 && iy < x.dim(1) && ix >= 0 && ix < x.dim(2))
                                s += w[((static_cast<std::size_t>(co) * c_in + ci) * k + ki) * k + kj] *
                                     x.at(ci, iy, ix);
                        }
                y.at(co, oy, ox) = s;
            }
    return y;
}

double weighted_sum(const Tensor<double>& y, const Tensor<double>& weights) {
    double s = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * weights[i];
    return s;
}

}  // namespace

TEST_CASE("conv forward matches the direct reference") {
    Rng rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        const int c_in = rng.uniform_int(1, 4), c_out = rng.uniform_int(1, 4);
        const int h = rng.uniform_int(4, 11), w = rng.uniform_int(4, 11);
        const int stride = rng.uniform_int(1, 2);
        nn::Conv2d<double> conv(c_in, c_out, 4, stride, 1, true);
        conv.init(rng);
        const auto x = random_tensor<double>({c_in, h, w}, rng);
        const auto y = conv.forward(x);
        const auto ref = conv_reference(x, conv.w, &conv.b, stride, 1, 1);
        REQUIRE(y.shape() == ref.shape());
        for (std::size_t i = 0; i < y.numel(); ++i)
            CHECK(std::abs(y[i] - ref[i]) < 1e-10);
    }
}

TEST_CASE("conv gradients match finite differences") {
    Rng rng(11);
    nn::Conv2d<double> conv(2, 3, 4, 2, 1, true);
    conv.init(rng);
    const auto x = random_tensor<double>({2, 8, 8}, rng);
    const auto probe = random_tensor<double>({3, 4, 4}, rng);

    auto loss = [&] { return weighted_sum(conv.forward(x), probe); };
    loss();
    conv.zero_grad();
    const auto dx = conv.backward(probe);

    std::vector<nn::ParamRef<double>> params;
    conv.collect("conv", params);
    CHECK(testutil::check_param_grads(params, loss, rng, 20) < 1e-6);

    // input gradient
    Tensor<double> x_mut = x;
    auto loss_x = [&] { return weighted_sum(conv.forward(x_mut), probe); };
    for (int k = 0; k < 20; ++k) {
        const int idx = rng.uniform_int(0, static_cast<int>(x.numel()) - 1);
        const double numeric = testutil::central_diff(&x_mut[idx], loss_x);
        CHECK(testutil::rel_err(dx[idx], numeric) < 1e-6);
    }
}

TEST_CASE("transposed conv upsamples and matches finite differences") {
    Rng rng(13);
    nn::ConvTranspose2d<double> up(3, 2, 4, 2, 1, true);
    up.init(rng);
    const auto x = random_tensor<double>({3, 5, 6}, rng);
    const auto y = up.forward(x);
    CHECK(y.dim(0) == 2);
    CHECK(y.dim(1) == 10);
    CHECK(y.dim(2) == 12);

    const auto probe = random_tensor<double>(y.shape(), rng);
    auto loss = [&] { return weighted_sum(up.forward(x), probe); };
    loss();
    up.zero_grad();
    const auto dx = up.backward(probe);

    std::vector<nn::ParamRef<double>> params;
    up.collect("up", params);
    CHECK(testutil::check_param_grads(params, loss, rng, 20) < 1e-6);

    Tensor<double> x_mut = x;
    auto loss_x = [&] { return weighted_sum(up.forward(x_mut), probe); };
    for (int k = 0; k < 20; ++k) {
        const int idx = rng.uniform_int(0, static_cast<int>(x.numel()) - 1);
        CHECK(testutil::rel_err(dx[idx], testutil::central_diff(&x_mut[idx], loss_x)) < 1e-6);
    }
}

TEST_CASE("conv/convT adjoint identity: <conv(x), y> == <x, convT(y)> with shared kernel") {
    Rng rng(17);
    nn::Conv2d<double> down(2, 3, 4, 2, 1, false);
    down.init(rng);
    nn::ConvTranspose2d<double> up(3, 2, 4, 2, 1, false);
    // convT with weights (in=3, out=2, k, k) equal to conv's (out=3, in=2, k, k)
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 2; ++b)
            for (int i = 0; i < 16; ++i)
                up.w[(static_cast<std::size_t>(a) * 2 + b) * 16 + i] =
                    down.w[(static_cast<std::size_t>(a) * 2 + b) * 16 + i];

    const auto x = random_tensor<double>({2, 8, 8}, rng);
    const auto y = random_tensor<double>({3, 4, 4}, rng);
    const auto cx = down.forward(x);
    const auto ty = up.forward(y);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < cx.numel(); ++i) lhs += cx[i] * y[i];
    for (std::size_t i = 0; i < ty.numel(); ++i) rhs += ty[i] * x[i];
    CHECK(std::abs(lhs - rhs) < 1e-9);
}

TEST_CASE("batch norm: train-mode output is normalized, gradients check out") {
    Rng rng(19);
    nn::BatchNorm2d<double> bn(3);
    bn.init(rng);
    auto x = random_tensor<double>({3, 5, 7}, rng, -2.0, 3.0);

    auto y = bn.forward(x, true);
    for (int c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        const int n = 35;
        for (int i = 0; i < n; ++i) {
            const double v = (y.data()[c * n + i] - bn.beta[c]) / bn.gamma[c];
            mean += v;
            var += v * v;
        }
        mean /= n;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var / n - 1.0) < 1e-3);  // eps-deflated variance
    }

    const auto probe = random_tensor<double>(x.shape(), rng);
    auto loss = [&] { return [&] { double s = 0; auto out = bn.forward(x, true);
        for (std::size_t i = 0; i < out.numel(); ++i) s += out[i] * probe[i]; return s; }(); };
    loss();
    bn.zero_grad();
    const auto dx = bn.backward(probe);

    std::vector<nn::ParamRef<double>> params;
    bn.collect("bn", params);
    CHECK(testutil::check_param_grads(params, loss, rng, 3) < 1e-5);

    auto loss_x = loss;
    for (int k = 0; k < 12; ++k) {
        const int idx = rng.uniform_int(0, static_cast<int>(x.numel()) - 1);
        CHECK(testutil::rel_err(dx[idx], testutil::central_diff(&x[idx], loss_x)) < 1e-5);
    }
}

TEST_CASE("batch norm eval mode applies the running statistics") {
    Rng rng(23);
    nn::BatchNorm2d<double> bn(2);
    bn.init(rng);
    auto x = random_tensor<double>({2, 4, 4}, rng);
    for (int i = 0; i < 5; ++i) bn.forward(x, true);
    const auto y = bn.forward(x, false);
    for (int c = 0; c < 2; ++c) {
        const double scale = bn.gamma[c] / std::sqrt(bn.run_var[c] + bn.eps);
        for (int i = 0; i < 16; ++i) {
            const double want = scale * (x.data()[c * 16 + i] - bn.run_mean[c]) + bn.beta[c];
            CHECK(y.data()[c * 16 + i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("activation gradients") {
    Rng rng(29);
    auto x = random_tensor<double>({2, 3, 3}, rng, -2.0, 2.0);
    const auto probe = random_tensor<double>(x.shape(), rng);

    auto check = [&](auto& layer) {
        auto loss = [&] {
            auto y = layer.forward(x);
            double s = 0;
            for (std::size_t i = 0; i < y.numel(); ++i) s += y[i] * probe[i];
            return s;
        };
        loss();
        const auto dx = layer.backward(probe);
        for (int k = 0; k < 10; ++k) {
            const int idx = rng.uniform_int(0, static_cast<int>(x.numel()) - 1);
            CHECK(testutil::rel_err(dx[idx], testutil::central_diff(&x[idx], loss)) < 1e-5);
        }
    };
    nn::LeakyReLU<double> lrelu(0.2);
    nn::ReLU<double> relu;
    nn::Tanh<double> tanh_;
    nn::Sigmoid<double> sig;
    check(lrelu);
    check(relu);
    check(tanh_);
    check(sig);
}

TEST_CASE("linear layer gradient") {
    Rng rng(31);
    nn::Linear<double> lin(10, 3);
    lin.init(rng);
    auto x = random_tensor<double>({10}, rng);
    const auto probe = random_tensor<double>({3}, rng);
    auto loss = [&] {
        auto y = lin.forward(x);
        double s = 0;
        for (int i = 0; i < 3; ++i) s += y[i] * probe[i];
        return s;
    };
    loss();
    lin.zero_grad();
    const auto dx = lin.backward(probe);
    std::vector<nn::ParamRef<double>> params;
    lin.collect("lin", params);
    CHECK(testutil::check_param_grads(params, loss, rng, 30) < 1e-7);
    for (int idx = 0; idx < 10; ++idx)
        CHECK(testutil::rel_err(dx[idx], testutil::central_diff(&x[idx], loss)) < 1e-7);
}

TEST_CASE("tiny-input padding bump keeps one output cell") {
    Rng rng(37);
    nn::Conv2d<double> conv(1, 2, 4, 2, 1, true);
    conv.init(rng);
    const auto y = conv.forward(random_tensor<double>({1, 1, 5}, rng));
    CHECK(y.dim(1) == 1);
    CHECK(y.dim(2) == 2);
}
