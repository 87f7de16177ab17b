#include <doctest.h>

#include <cmath>
#include <vector>

#include "mvc/rng.hpp"

using namespace mvc;

// Frozen vectors computed with an independent straight-line implementation of
// the documented algorithms (splitmix64 seeding, xoshiro256++ transition,
// bitmask rejection, 53-bit unit doubles, two-draw Box-Muller).

TEST_CASE("xoshiro state words come from splitmix64 of the seed") {
    std::uint64_t sm = 42;
    CHECK(splitmix_next(sm) == 0xbdd732262feb6e95ull);
    CHECK(splitmix_next(sm) == 0x28efe333b266f103ull);
    CHECK(splitmix_next(sm) == 0x47526757130f9f52ull);
    CHECK(splitmix_next(sm) == 0x581ce1ff0e4ae394ull);
}

TEST_CASE("raw output sequence matches the frozen oracle") {
    const std::vector<std::uint64_t> expected = {
        0xd0764d4f4476689full, 0x519e4174576f3791ull, 0xfbe07cfb0c24ed8cull,
        0xb37d9f600cd835b8ull, 0xcb231c3874846a73ull, 0x968d9f004e50de7dull,
        0x201718ff221a3556ull, 0x9ae94e070ed8cb46ull,
    };
    RngStream rng(42);
    for (const std::uint64_t want : expected) CHECK(rng.next_u64() == want);
}

TEST_CASE("fnv1a64 known values") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}

TEST_CASE("derive acts on the originating seed, not the evolving state") {
    RngStream rng(42);
    CHECK(rng.seed() == 42);
    const RngStream fresh = rng.derive("a");
    CHECK(fresh.seed() == 0x2c987fe0b5e27e11ull);
    CHECK(rng.derive(std::uint64_t{7}).seed() == 0x523fb4dd5d162e88ull);

    rng.next_u64();
    rng.next_u64();
    RngStream after = rng.derive("a");
    RngStream before = RngStream(42).derive("a");
    for (int i = 0; i < 8; ++i) CHECK(after.next_u64() == before.next_u64());
}

TEST_CASE("below uses bitmask rejection and stays in range") {
    RngStream rng(7);
    const std::vector<int> expected = {5, 4, 2, 4, 1, 0, 0, 5, 5, 1, 1, 3};
    for (const int want : expected) CHECK(rng.below(6) == static_cast<std::uint64_t>(want));

    RngStream wide(3);
    for (int i = 0; i < 1000; ++i) CHECK(wide.below(17) < 17);
    CHECK(wide.below(1) == 0);
    CHECK_THROWS_AS(wide.below(0), Error);
}

TEST_CASE("unit doubles take the top 53 bits") {
    RngStream rng(7);
    CHECK(rng.unit_double() == doctest::Approx(0.055360436478333108).epsilon(1e-15));
    CHECK(rng.unit_double() == doctest::Approx(0.17211585444811772).epsilon(1e-15));
    CHECK(rng.unit_double() == doctest::Approx(0.71757612835865936).epsilon(1e-15));
    CHECK(rng.unit_double() == doctest::Approx(0.42720981929150526).epsilon(1e-15));
    RngStream again(7);
    CHECK(again.unit_double() ==
          static_cast<double>(RngStream(7).next_u64() >> 11) * 0x1.0p-53);
}

TEST_CASE("normal consumes exactly two draws per call") {
    RngStream rng(9);
    CHECK(rng.normal() == doctest::Approx(-0.91529948895893165).epsilon(1e-12));
    CHECK(rng.normal() == doctest::Approx(1.3397100124959329).epsilon(1e-12));
    CHECK(rng.normal() == doctest::Approx(1.5409506592992448).epsilon(1e-12));
    CHECK(rng.normal() == doctest::Approx(0.28201875761588607).epsilon(1e-12));

    RngStream raw(9);
    RngStream gauss(9);
    gauss.normal();
    raw.next_u64();
    raw.next_u64();
    CHECK(gauss.next_u64() == raw.next_u64());
}

TEST_CASE("normal moments are sane") {
    RngStream rng(123);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below is unbiased across the range") {
    RngStream rng(55);
    const int n = 60000;
    std::vector<int> counts(6, 0);
    for (int i = 0; i < n; ++i) ++counts[rng.below(6)];
    for (const int c : counts) CHECK(std::abs(c - n / 6) < 400);
}

TEST_CASE("distinct labels and indices give distinct streams") {
    RngStream root(1);
    CHECK(root.derive("x").next_u64() != root.derive("y").next_u64());
    CHECK(root.derive(std::uint64_t{0}).next_u64() != root.derive(std::uint64_t{1}).next_u64());
    CHECK(root.derive("x").derive("y").next_u64() != root.derive("y").derive("x").next_u64());
}
