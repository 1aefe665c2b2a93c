#include <doctest.h>

#include <algorithm>
#include <set>

#include "celebi/rng.hpp"

using namespace celebi;

TEST_CASE("streams are deterministic and label-separated") {
    RngStream a = RngStream::derive(42, "noise");
    RngStream b = RngStream::derive(42, "noise");
    RngStream c = RngStream::derive(42, "split");
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
    RngStream a2 = RngStream::derive(42, "noise");
    bool differs = false;
    for (int i = 0; i < 16; ++i) differs |= a2.next_u64() != c.next_u64();
    CHECK(differs);
}

TEST_CASE("uniform01 stays in [0,1) and has a sane mean") {
    RngStream rng(7);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / 100000.0 - 0.5) < 0.01);
}

TEST_CASE("below is unbiased enough and in range") {
    RngStream rng(3);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) {
        const auto v = rng.below(5);
        REQUIRE(v < 5);
        ++counts[static_cast<int>(v)];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("shuffle permutes") {
    RngStream rng(11);
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i;
    auto orig = v;
    rng.shuffle(v);
    CHECK(v != orig);
    std::sort(v.begin(), v.end());
    CHECK(v == orig);
}

TEST_CASE("gumbel draws are finite") {
    RngStream rng(5);
    for (int i = 0; i < 100000; ++i) REQUIRE(std::isfinite(rng.gumbel()));
}
