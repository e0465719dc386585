#include "skewcp/parallel.hpp"
#include "skewcp/rng.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

using namespace skewcp;

TEST(Rng, SplitMixReferenceVector)
{
    std::uint64_t state = 0;
    EXPECT_EQ(splitmix64(state), 0xE220A8397B1DCDAFULL);
    EXPECT_EQ(splitmix64(state), 0x6E789E6AA1B965F4ULL);
    EXPECT_EQ(splitmix64(state), 0x06C45D188009454FULL);
}

TEST(Rng, XoshiroReferenceVector)
{
    auto g = Xoshiro256::from_state(1, 2, 3, 4);
    EXPECT_EQ(g(), 11520ULL);
    EXPECT_EQ(g(), 0ULL);
    EXPECT_EQ(g(), 1509978240ULL);
    EXPECT_EQ(g(), 1215971899390074240ULL);
}

TEST(Rng, SameSeedSameStream)
{
    Xoshiro256 a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a();
        EXPECT_EQ(va, b());
        differs = differs || va != c();
    }
    EXPECT_TRUE(differs);
}

TEST(Rng, DerivedSeedsDistinct)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t master : {0ULL, 1ULL, 7ULL}) {
        for (std::uint64_t s = 0; s < 1000; ++s) {
            seen.insert(derive_seed(master, s));
        }
    }
    EXPECT_EQ(seen.size(), 3000u);
}

TEST(Rng, Uniform01RangeAndMean)
{
    Xoshiro256 g(5);
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = uniform01(g);
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 0.005);
}

TEST(Rng, UniformIndexCoversRangeEvenly)
{
    Xoshiro256 g(9);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto k = uniform_index(g, 7);
        ASSERT_LT(k, 7u);
        ++counts[k];
    }
    for (int c : counts) {
        EXPECT_NEAR(c, n / 7, 400);
    }
}

TEST(Rng, StandardNormalMoments)
{
    Xoshiro256 g(11);
    const int n = 200000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = standard_normal(g);
        ASSERT_TRUE(std::isfinite(z));
        s1 += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s1 / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation)
{
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    Xoshiro256 g(3);
    shuffle(std::span<int>(v), g);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
    }
    EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Parallel, VisitsEveryIndexOnce)
{
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) {
        EXPECT_EQ(h.load(), 1);
    }
}

TEST(Parallel, RethrowsWorkerException)
{
    EXPECT_THROW(parallel_for(10,
                              [](std::size_t i) {
                                  if (i == 4) {
                                      throw std::runtime_error("boom");
                                  }
                              }),
                 std::runtime_error);
}
