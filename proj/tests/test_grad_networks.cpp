#include <doctest.h>

#include "grad_check_common.hpp"

TEST_CASE("background discriminator gradients vs finite differences") {
    const auto r = gradcheck::check_background_discriminator();
    CHECK(r.checked >= 100);
    CHECK(r.worst_rel_err < 1e-3);
}

TEST_CASE("pedestrian discriminator gradients vs finite differences") {
    const auto r = gradcheck::check_pedestrian_discriminator();
    CHECK(r.checked >= 100);
    CHECK(r.worst_rel_err < 1e-3);
}

TEST_CASE("generator gradients vs finite differences through both discriminators") {
    const auto r = gradcheck::check_generator();
    CHECK(r.checked >= 100);
    CHECK(r.worst_rel_err < 1e-3);
}
