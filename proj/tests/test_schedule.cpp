#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ldadam/schedule.hpp"

using namespace ldadam;

TEST_CASE("warmup ramp hits base_lr exactly at the boundary") {
    Schedule s{1e-3, 100, Schedule::Decay::linear_to_zero, 0.1, 1000};
    CHECK(s.lr(100) == doctest::Approx(1e-3));
    CHECK(s.lr(50) == doctest::Approx(5e-4));
    CHECK(s.lr(1) == doctest::Approx(1e-5));
}

TEST_CASE("linear decay reaches zero at total_steps") {
    Schedule s{2e-4, 20, Schedule::Decay::linear_to_zero, 0.1, 702};
    CHECK(s.lr(702) == doctest::Approx(0.0));
    CHECK(s.lr(20) == doctest::Approx(2e-4));
    // continuity just past the boundary
    CHECK(s.lr(21) == doctest::Approx(2e-4 * (1.0 - 1.0 / 682.0)));
}

TEST_CASE("cosine decay ends at the configured fraction") {
    Schedule s{5e-4, 2000, Schedule::Decay::cosine_to_fraction, 0.1, 20000};
    CHECK(s.lr(20000) == doctest::Approx(0.1 * 5e-4));
    CHECK(s.lr(2000) == doctest::Approx(5e-4));
    CHECK(s.lr(11000) == doctest::Approx(5e-4 * (0.1 + 0.9 * 0.5)));
}

TEST_CASE("constant schedule and range checks") {
    Schedule s{1e-2, 0, Schedule::Decay::constant, 0.1, 10};
    CHECK(s.lr(1) == 1e-2);
    CHECK(s.lr(10) == 1e-2);
    CHECK_THROWS(s.lr(0));
    CHECK_THROWS(s.lr(11));
}

TEST_CASE("lr is nonnegative across the whole horizon") {
    Schedule s{3e-4, 55, Schedule::Decay::cosine_to_fraction, 0.1, 550};
    for (std::size_t t = 1; t <= 550; ++t) CHECK(s.lr(t) >= 0.0);
}
