#include <doctest.h>

#include <cmath>

#include "psgan/nn/losses.hpp"
#include "test_util.hpp"

using namespace psgan;

namespace {

template <typename T>
Tensor<T> scalar(T v) {
    Tensor<T> t({1});
    t[0] = v;
    return t;
}

}  // namespace

TEST_CASE("least-squares discriminator loss identities") {
    const auto ones = Tensor<double>::full({1, 2, 2}, 1.0);
    const auto zeros = Tensor<double>::full({1, 2, 2}, 0.0);
    CHECK(loss::lsgan_d_loss(ones, zeros) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(loss::lsgan_d_loss(zeros, ones) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(loss::lsgan_d_loss(scalar(0.5), scalar(0.5)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(loss::lsgan_d_loss(ones, scalar(0.5)), ShapeError);
}

TEST_CASE("least-squares generator loss identities") {
    CHECK(loss::lsgan_g_loss(Tensor<double>::full({3, 3}, 1.0)) == doctest::Approx(0.0));
    CHECK(loss::lsgan_g_loss(Tensor<double>::full({3, 3}, 0.0)) == doctest::Approx(1.0));
    Tensor<double> t({2});
    t[0] = 0.25;
    t[1] = 0.75;
    CHECK(loss::lsgan_g_loss(t) == doctest::Approx(0.3125).epsilon(1e-12));
}

TEST_CASE("negative log likelihood identities") {
    CHECK(loss::nll_dp_loss(scalar(1.0), scalar(0.0)) ==
          doctest::Approx(-2.0 * std::log(1.0 - loss::kProbClamp)).epsilon(1e-9));
    CHECK(loss::nll_dp_loss(scalar(0.5), scalar(0.5)) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    // clamped at the boundary: large but finite
    const double v = loss::nll_dp_loss(scalar(0.0), scalar(0.5));
    CHECK(std::isfinite(v));
    CHECK(v > 15.0);
    CHECK_THROWS_AS(loss::nll_dp_loss(scalar(1.5), scalar(0.5)), DomainError);

    CHECK(loss::nll_g_dp_loss(scalar(0.5)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(loss::nll_g_dp_loss(scalar(std::exp(-3.0))) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("l1 loss identities") {
    CHECK(loss::l1_loss(Tensor<double>::full({4}, 0.7), Tensor<double>::full({4}, 0.7)) == 0.0);
    CHECK(loss::l1_loss(Tensor<double>::full({4}, 1.0), Tensor<double>::full({4}, 0.0)) == 1.0);
    Tensor<double> a({2}), b({2});
    a[0] = 1.0;
    a[1] = -1.0;
    CHECK(loss::l1_loss(a, b) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("total generator loss combines with lambda") {
    LossWeights w;
    CHECK(loss::total_g_loss(0.0, 0.0, 0.0, w) == 0.0);
    CHECK(loss::total_g_loss(0.5, 0.7, 0.01, w) == doctest::Approx(2.2).epsilon(1e-12));
    w.lambda_l1 = 0.0;
    CHECK(loss::total_g_loss(0.5, 0.7, 0.9, w) == doctest::Approx(1.2).epsilon(1e-12));
}

TEST_CASE("lsgan_d_loss minimized exactly at real=1, fake=0 (grid search)") {
    double best = 1e9;
    double best_r = -1, best_f = -1;
    for (int ri = 0; ri <= 20; ++ri)
        for (int fi = 0; fi <= 20; ++fi) {
            const double r = ri / 20.0, f = fi / 20.0;
            const double v = loss::lsgan_d_loss(scalar(r), scalar(f));
            if (v < best) {
                best = v;
                best_r = r;
                best_f = f;
            }
        }
    CHECK(best == 0.0);
    CHECK(best_r == 1.0);
    CHECK(best_f == 0.0);
}

TEST_CASE("all losses are non-negative and finite under clamping") {
    Rng rng(101);
    for (int trial = 0; trial < 50; ++trial) {
        const auto m1 = testutil::random_tensor<double>({1, 3, 3}, rng, -3.0, 3.0);
        const auto m2 = testutil::random_tensor<double>({1, 3, 3}, rng, -3.0, 3.0);
        const auto p1 = testutil::random_tensor<double>({1}, rng, 0.0, 1.0);
        const auto p2 = testutil::random_tensor<double>({1}, rng, 0.0, 1.0);
        for (double v : {loss::lsgan_d_loss(m1, m2), loss::lsgan_g_loss(m1),
                         loss::nll_dp_loss(p1, p2), loss::nll_g_dp_loss(p2),
                         loss::l1_loss(m1, m2)}) {
            CHECK(v >= 0.0);
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("loss gradients match finite differences") {
    Rng rng(103);
    auto real = testutil::random_tensor<double>({1, 2, 3}, rng, -2.0, 2.0);
    auto fake = testutil::random_tensor<double>({1, 2, 3}, rng, -2.0, 2.0);
    Tensor<double> dr, df;

    loss::lsgan_d_loss_grad(real, fake, dr, df);
    for (int k = 0; k < 6; ++k) {
        auto l = [&] { return static_cast<double>(loss::lsgan_d_loss(real, fake)); };
        CHECK(testutil::rel_err(dr[k], testutil::central_diff(&real[k], l)) < 1e-7);
        CHECK(testutil::rel_err(df[k], testutil::central_diff(&fake[k], l)) < 1e-7);
    }

    loss::lsgan_g_loss_grad(fake, df);
    for (int k = 0; k < 6; ++k) {
        auto l = [&] { return static_cast<double>(loss::lsgan_g_loss(fake)); };
        CHECK(testutil::rel_err(df[k], testutil::central_diff(&fake[k], l)) < 1e-7);
    }

    auto pr = testutil::random_tensor<double>({4}, rng, 0.2, 0.8);
    auto pf = testutil::random_tensor<double>({4}, rng, 0.2, 0.8);
    loss::nll_dp_loss_grad(pr, pf, dr, df);
    for (int k = 0; k < 4; ++k) {
        auto l = [&] { return static_cast<double>(loss::nll_dp_loss(pr, pf)); };
        CHECK(testutil::rel_err(dr[k], testutil::central_diff(&pr[k], l)) < 1e-6);
        CHECK(testutil::rel_err(df[k], testutil::central_diff(&pf[k], l)) < 1e-6);
    }

    auto gen = testutil::random_tensor<double>({2, 3, 3}, rng);
    auto truth = testutil::random_tensor<double>({2, 3, 3}, rng);
    Tensor<double> dg;
    loss::l1_loss_grad(gen, truth, dg);
    for (int k = 0; k < 10; ++k) {
        auto l = [&] { return static_cast<double>(loss::l1_loss(gen, truth)); };
        CHECK(testutil::rel_err(dg[k], testutil::central_diff(&gen[k], l)) < 1e-6);
    }
}
