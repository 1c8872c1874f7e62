#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "calib/core.hpp"

using namespace calib;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorKind::BadConfig;
}

}  // namespace

TEST(MakeEmpirical, SingleSample) {
    const auto d = make_empirical({{0.5, 1}});
    EXPECT_EQ(d.size(), 1U);
    EXPECT_DOUBLE_EQ(d.mass(0), 1.0);
}

TEST(MakeEmpirical, RejectsPredictionAboveOne) {
    EXPECT_EQ(kind_of([] { make_empirical({{0.2, 0}, {1.2, 1}}); }), ErrorKind::OutOfRange);
}

TEST(MakeEmpirical, RejectsEmptyAndBadLabel) {
    EXPECT_EQ(kind_of([] { make_empirical({}); }), ErrorKind::EmptyInput);
    EXPECT_EQ(kind_of([] { make_empirical({{0.5, 2}}); }), ErrorKind::BadLabel);
    EXPECT_EQ(kind_of([] { make_empirical({{std::nan(""), 0}}); }), ErrorKind::OutOfRange);
}

TEST(MakeEmpirical, PreservesOrder) {
    const auto d = make_empirical({{0.3, 1}, {0.7, 0}});
    ASSERT_EQ(d.size(), 2U);
    EXPECT_EQ(d.samples()[0], (Sample{0.3, 1}));
    EXPECT_EQ(d.samples()[1], (Sample{0.7, 0}));
}

TEST(MakeEmpirical, RoundTripsRandomLists) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<std::pair<double, int>> pairs;
        for (int i = 0; i < 1 + t; ++i) pairs.emplace_back(u(gen), static_cast<int>(gen() % 2));
        const auto d = make_empirical(pairs);
        ASSERT_EQ(d.size(), pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            EXPECT_EQ(d.prediction(i), pairs[i].first);
            EXPECT_EQ(d.label(i), pairs[i].second);
        }
    }
}

TEST(RoundToGrid, NearestPoint) {
    const auto d = round_to_grid(make_empirical({{0.26, 1}}), 0.25);
    EXPECT_EQ(d.samples()[0], (Sample{0.25, 1}));
}

TEST(RoundToGrid, TieGoesUp) {
    const auto d = round_to_grid(make_empirical({{0.125, 0}}), 0.25);
    EXPECT_EQ(d.samples()[0], (Sample{0.25, 0}));
}

TEST(RoundToGrid, StaysInsideUnitInterval) {
    // Multiples of 0.3 in [0,1] are 0, 0.3, 0.6, 0.9; the nearest to 1 is 0.9.
    const auto d = round_to_grid(make_empirical({{1.0, 1}}), 0.3);
    EXPECT_NEAR(d.prediction(0), 0.9, 1e-12);
    EXPECT_EQ(d.label(0), 1);
}

TEST(RoundToGrid, RejectsBadStep) {
    const auto d = make_empirical({{0.5, 1}});
    EXPECT_EQ(kind_of([&] { round_to_grid(d, 0.0); }), ErrorKind::BadStep);
    EXPECT_EQ(kind_of([&] { round_to_grid(d, 1.5); }), ErrorKind::BadStep);
}

TEST(RoundToGrid, IdempotentWithinHalfStep) {
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double step : {0.3, 0.25, 0.1, 0.005, 0.007, 1.0}) {
        std::vector<std::pair<double, int>> pairs;
        for (int i = 0; i < 200; ++i) pairs.emplace_back(u(gen), static_cast<int>(gen() % 2));
        pairs.emplace_back(1.0, 1);
        pairs.emplace_back(0.0, 0);
        const auto d = make_empirical(pairs);
        const auto once = round_to_grid(d, step);
        const auto twice = round_to_grid(once, step);
        for (std::size_t i = 0; i < d.size(); ++i) {
            EXPECT_EQ(once.prediction(i), twice.prediction(i));
            EXPECT_LE(std::abs(once.prediction(i) - d.prediction(i)), step / 2 + 1e-12);
            EXPECT_EQ(once.label(i), d.label(i));
            const double k = once.prediction(i) / step;
            EXPECT_TRUE(std::abs(k - std::round(k)) < 1e-9 || once.prediction(i) == 1.0);
        }
    }
}

TEST(ReliabilityBins, TwoBinsTwoSamples) {
    const auto bins = reliability_bins(make_empirical({{0.1, 0}, {0.9, 1}}), 2);
    ASSERT_EQ(bins.size(), 2U);
    EXPECT_EQ(bins[0].count, 1U);
    EXPECT_EQ(bins[1].count, 1U);
    EXPECT_DOUBLE_EQ(bins[0].mean_y, 0.0);
    EXPECT_DOUBLE_EQ(bins[1].mean_y, 1.0);
    EXPECT_DOUBLE_EQ(bins[0].mean_v, 0.1);
}

TEST(ReliabilityBins, HalfOpenBoundary) {
    const auto bins = reliability_bins(make_empirical({{0.5, 1}}), 2);
    EXPECT_EQ(bins[0].count, 0U);
    EXPECT_TRUE(std::isnan(bins[0].mean_v));
    EXPECT_EQ(bins[1].count, 1U);
}

TEST(ReliabilityBins, LastBinClosedAtOne) {
    const auto bins = reliability_bins(make_empirical({{1.0, 1}}), 4);
    EXPECT_EQ(bins[3].count, 1U);
    EXPECT_DOUBLE_EQ(bins[3].hi, 1.0);
}

TEST(ReliabilityBins, RejectsZeroBins) {
    EXPECT_EQ(kind_of([] { reliability_bins(make_empirical({{0.5, 1}}), 0); }), ErrorKind::BadBins);
}

TEST(ReliabilityBins, CountsSumToN) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int bins : {1, 2, 3, 7, 20, 100}) {
        std::vector<std::pair<double, int>> pairs;
        for (int i = 0; i < 333; ++i) pairs.emplace_back(i % 11 == 0 ? 1.0 : u(gen), 0);
        const auto out = reliability_bins(make_empirical(pairs), bins);
        std::size_t total = 0;
        for (const auto& b : out) {
            EXPECT_LT(b.lo, b.hi);
            total += b.count;
        }
        EXPECT_EQ(total, pairs.size());
    }
}

TEST(SeededRng, SameSeedSameStream) {
    SeededRng a(42), b(42), c(43);
    bool differs = false;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a.next_u64();
        EXPECT_EQ(x, b.next_u64());
        differs |= x != c.next_u64();
    }
    EXPECT_TRUE(differs);
}

TEST(SeededRng, DerivedStreamsAreDistinctAndStable) {
    const SeededRng base(9);
    std::set<std::uint64_t> firsts;
    for (std::uint64_t a = 0; a < 20; ++a)
        for (std::uint64_t b = 0; b < 20; ++b) firsts.insert(base.derive(a, b).next_u64());
    EXPECT_EQ(firsts.size(), 400U);
    EXPECT_EQ(base.derive(3, 4).next_u64(), SeededRng(9).derive(3, 4).next_u64());
}

TEST(SeededRng, UniformRanges) {
    SeededRng r(5);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        const double v = r.uniform_open_closed();
        ASSERT_GT(v, 0.0);
        ASSERT_LE(v, 1.0);
        ASSERT_LT(r.index(7), 7U);
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(SeededRng, GammaTwoMeanAndCauchyMedian) {
    SeededRng r(6);
    const int n = 200000;
    double g = 0.0;
    int below = 0;
    for (int i = 0; i < n; ++i) {
        g += r.gamma2();
        below += r.cauchy() < 0.0;
    }
    // Gamma(2,1) has mean 2 and variance 2; Cauchy has median 0.
    EXPECT_NEAR(g / n, 2.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(static_cast<double>(below) / n, 0.5, 4.0 * 0.5 / std::sqrt(n));
}

TEST(WeightedDistribution, ValidatesMasses) {
    EXPECT_EQ(kind_of([] { WeightedDistribution({{0.5, 1, 0.4}}); }), ErrorKind::BadConfig);
    EXPECT_EQ(kind_of([] { WeightedDistribution({}); }), ErrorKind::EmptyInput);
    const auto w = to_weighted(make_empirical({{0.2, 0}, {0.4, 1}}));
    EXPECT_DOUBLE_EQ(w.mass(0) + w.mass(1), 1.0);
}
