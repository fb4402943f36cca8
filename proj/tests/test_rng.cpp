#include "daks/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using daks::Rng;

TEST(Rng, EngineMatchesStandardCheckValue)
{
    Rng rng(5489);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) {
        x = rng.next();
    }
    EXPECT_EQ(x, 9981545732273789042ULL);
}

TEST(Rng, DeriveSeedGolden)
{
    EXPECT_EQ(daks::derive_seed(7, {1, 2}), 7678777974472554187ULL);
    EXPECT_NE(daks::derive_seed(7, {1, 2}), daks::derive_seed(7, {2, 1}));
    EXPECT_NE(daks::derive_seed(7, {1}), daks::derive_seed(8, {1}));
}

TEST(Rng, UnitGolden)
{
    Rng rng(99);
    const std::vector<std::uint64_t> mant = {3914029026567055ULL, 8837156723988220ULL, 6035706639405509ULL};
    for (auto m : mant) {
        EXPECT_EQ(rng.unit(), std::ldexp(static_cast<double>(m), -53));
    }
}

TEST(Rng, BelowStaysInRange)
{
    Rng rng(3);
    for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 7ULL, 1000ULL, (1ULL << 63) + 5}) {
        for (int i = 0; i < 1000; ++i) {
            EXPECT_LT(rng.below(bound), bound);
        }
    }
    EXPECT_THROW(rng.below(0), std::invalid_argument);
}

TEST(Rng, BernoulliEdges)
{
    Rng rng(4);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_FALSE(rng.bernoulli(0.0));
        EXPECT_TRUE(rng.bernoulli(1.0));
    }
}
