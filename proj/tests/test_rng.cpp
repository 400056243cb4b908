#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "deepkernel/rng.hpp"

using namespace dk;

TEST_CASE("philox4x32-10 reference vectors") {
    // The zero/ones/pi-digit inputs of the generator's standard test set,
    // cross-checked against an independent implementation of the round
    // function.
    {
        const auto r = philox4x32({0, 0, 0, 0}, {0, 0});
        CHECK(r[0] == 0x6627e8d5u);
        CHECK(r[1] == 0xe169c58du);
        CHECK(r[2] == 0xbc57ac4cu);
        CHECK(r[3] == 0x9b00dbd8u);
    }
    {
        const auto r = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                  {0xffffffffu, 0xffffffffu});
        CHECK(r[0] == 0x408f276du);
        CHECK(r[1] == 0x41c83b0eu);
        CHECK(r[2] == 0xa20bc7c6u);
        CHECK(r[3] == 0x6d5451fdu);
    }
    {
        const auto r = philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                  {0xa4093822u, 0x299f31d0u});
        CHECK(r[0] == 0xd16cfe09u);
        CHECK(r[1] == 0x94fdccebu);
        CHECK(r[2] == 0x5001e420u);
        CHECK(r[3] == 0x24126ea1u);
    }
}

TEST_CASE("philox output is a pure function of counter and key") {
    const std::array<std::uint32_t, 4> c{7, 11, 13, 17};
    const std::array<std::uint32_t, 2> k{23, 29};
    CHECK(philox4x32(c, k) == philox4x32(c, k));
    CHECK(philox4x32(c, k) != philox4x32(c, {23, 30}));
    CHECK(philox4x32(c, k) != philox4x32({8, 11, 13, 17}, k));
}

TEST_CASE("streams replay and do not collide") {
    RandomStream a(42, 0), b(42, 0), c(42, 1), d(43, 0);
    bool all_equal = true, stream_differs = false, seed_differs = false;
    for (int i = 0; i < 100; ++i) {
        const double va = a.normal();
        all_equal = all_equal && (va == b.normal());
        stream_differs = stream_differs || (va != c.normal());
        seed_differs = seed_differs || (va != d.normal());
    }
    CHECK(all_equal);
    CHECK(stream_differs);
    CHECK(seed_differs);
}

TEST_CASE("fill_normal matches sequential draws") {
    RandomStream a(5, 9), b(5, 9);
    std::vector<double> buf(17);
    a.fill_normal(buf.data(), buf.size());
    for (double v : buf) CHECK(v == b.normal());
}

TEST_CASE("normal moments") {
    RandomStream rs(123, 0);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0, sum3 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rs.normal();
        sum += v;
        sum2 += v * v;
        sum3 += v * v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    // se(mean) = 1/sqrt(n), se(var) ~ sqrt(2/n), se(3rd moment) ~ sqrt(15/n)
    CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(sum3 / n) < 4.0 * std::sqrt(15.0 / n));
}

TEST_CASE("uniform range and moments") {
    RandomStream rs(7, 3);
    const int n = 200000;
    double sum = 0.0;
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rs.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    CHECK(std::abs(sum / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);

    RandomStream rs2(7, 4);
    for (int i = 0; i < 1000; ++i) {
        const double v = rs2.uniform(-2.0, 3.0);
        CHECK(v >= -2.0);
        CHECK(v < 3.0);
    }
}

TEST_CASE("normals are standard normal by distribution") {
    // Coarse CDF check at a few quantiles.
    RandomStream rs(99, 0);
    const int n = 100000;
    int below0 = 0, below1 = 0;
    for (int i = 0; i < n; ++i) {
        const double v = rs.normal();
        below0 += v < 0.0;
        below1 += v < 1.0;
    }
    const double p0 = double(below0) / n;        // expect 0.5
    const double p1 = double(below1) / n;        // expect Phi(1) = 0.8413
    CHECK(std::abs(p0 - 0.5) < 4.0 * std::sqrt(0.25 / n));
    CHECK(std::abs(p1 - 0.8413447460685429) < 4.0 * std::sqrt(0.84 * 0.16 / n));
}

TEST_CASE("batch accumulator mean is exact and std error sane") {
    // A plan of 100 batches over 250 values gives per-batch size 2; every
    // full batch enters the spread estimate and any trailing remainder still
    // carries its weight in the mean.
    BatchAccumulator acc(251, 100);
    double sum = 0.0;
    for (int i = 0; i < 251; ++i) {
        const double v = std::sin(0.1 * i);
        acc.add(v);
        sum += v;
    }
    CHECK(acc.count() == 251);
    CHECK(acc.mean() == doctest::Approx(sum / 251.0).epsilon(1e-14));
    CHECK(acc.std_error() > 0.0);
}

TEST_CASE("batch accumulator std error shrinks like 1/sqrt(n)") {
    RandomStream rs(2024, 0);
    BatchAccumulator small(10000), big(1000000);
    for (int i = 0; i < 10000; ++i) small.add(rs.normal());
    RandomStream rs2(2024, 0);
    for (int i = 0; i < 1000000; ++i) big.add(rs2.normal());
    // Expect roughly a factor of 10; allow a factor-of-2 corridor.
    const double ratio = small.std_error() / big.std_error();
    CHECK(ratio > 5.0);
    CHECK(ratio < 20.0);
    CHECK(std::abs(big.mean()) < 4.0 * big.std_error());
}
