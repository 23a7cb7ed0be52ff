#include "collabtime/fitting.hpp"
#include "collabtime/synth.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

using namespace collabtime;

namespace
{

// Exact CDF points at x = 1..n, keeping F well inside (0, 1) so the double-log
// transform stays well conditioned.
CdfPoints<double> exact_points(double k, double lambda, int n = 60)
{
    std::vector<double> xs, fs;
    for (int x = 1; x <= n; ++x)
    {
        double f = weibull_cdf<double>(x, {k, lambda});
        if (f > 1e-6 && f < 1.0 - 1e-6)
        {
            xs.push_back(x);
            fs.push_back(f);
        }
    }
    CdfPoints<double> p;
    p.lifetime = Eigen::Map<ArrayX<double>>(xs.data(), xs.size());
    p.cumulative = Eigen::Map<ArrayX<double>>(fs.data(), fs.size());
    p.n_samples = 1000;
    return p;
}

CohortTable weibull_table(double k, double lambda, std::uint64_t n, std::uint64_t seed, int max_lifetime = 60)
{
    std::mt19937_64 rng(seed);
    CohortBuilder builder(EntityKind::node, max_lifetime);
    LifetimeSampler sampler(WeibullLaw{k, lambda});
    for (std::uint64_t i = 0; i < n; ++i)
        builder.add({2000, static_cast<int>(std::ceil(std::min(sampler(rng), 1e6)))});
    return builder.release().at(2000);
}

CohortTable powerlaw_table(double alpha, std::uint64_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    CohortBuilder builder(EntityKind::node, 60);
    LifetimeSampler sampler(PowerLawLaw{alpha, 1});
    for (std::uint64_t i = 0; i < n; ++i)
        builder.add({2000, static_cast<int>(std::min(sampler(rng), 1e6))});
    return builder.release().at(2000);
}

CohortTable table_from(std::initializer_list<std::pair<int, std::uint64_t>> bins, int max_lifetime = 60)
{
    CohortTable t;
    t.cohort_year = 1950;
    t.histogram.assign(max_lifetime + 1, 0);
    for (auto [dt, n] : bins)
    {
        t.histogram[dt] += n;
        t.total += n;
    }
    return t;
}

const WeibullParams<double>& weibull_of(const FitOutcome& outcome)
{
    return *std::get<FitResult>(outcome).weibull();
}

double median(std::vector<double> v)
{
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

}  // namespace

TEST(WeibullLine, ExponentialRecoveredExactly)
{
    auto fit = fit_weibull(exact_points(1.0, 1.0, 20));
    ASSERT_TRUE(std::holds_alternative<FitResult>(fit));
    EXPECT_NEAR(weibull_of(fit).k, 1.0, 1e-12);
    EXPECT_NEAR(weibull_of(fit).lambda, 1.0, 1e-12);
}

TEST(WeibullLine, ScalePointTransformsToZero)
{
    ArrayX<double> f(1);
    f << weibull_cdf<double>(5.0, {0.3, 5.0});
    EXPECT_NEAR(f[0], 1.0 - std::exp(-1.0), 1e-15);
    EXPECT_NEAR(weibull_linearize(f)[0], 0.0, 1e-15);
}

TEST(WeibullLine, ExactRecoveryGrid)
{
    for (double k : {0.2, 0.5, 1.0, 1.5})
        for (double lambda : {2.0, 10.0, 30.0})
        {
            auto fit = fit_weibull(exact_points(k, lambda));
            ASSERT_TRUE(std::holds_alternative<FitResult>(fit)) << k << " " << lambda;
            EXPECT_LE(std::abs(weibull_of(fit).k / k - 1), 1e-9) << k << " " << lambda;
            EXPECT_LE(std::abs(weibull_of(fit).lambda / lambda - 1), 1e-9) << k << " " << lambda;
        }
}

TEST(WeibullLine, ScaleEquivariance)
{
    const double k = 0.7, lambda = 6.0, s = 3.5;
    auto base = exact_points(k, lambda, 40);
    auto scaled = base;
    scaled.lifetime *= s;
    auto a = weibull_of(fit_weibull(base));
    auto b = weibull_of(fit_weibull(scaled));
    EXPECT_NEAR(b.k, a.k, 1e-10);
    EXPECT_NEAR(b.lambda / a.lambda, s, 1e-9);
}

TEST(WeibullLine, DegenerateAndNonpositive)
{
    ArrayX<double> x(3), f(3);
    x << 2, 2, 2;
    f << 0.1, 0.2, 0.3;
    auto r = fit_weibull_line(x, f);
    ASSERT_TRUE(std::holds_alternative<NoFit>(r));

    x << 1, 2, 3;
    f << 0.5, 0.4, 0.3;
    r = fit_weibull_line(x, f);
    ASSERT_TRUE(std::holds_alternative<NoFit>(r));
    EXPECT_EQ(std::get<NoFit>(r).reason, "nonpositive shape");

    ArrayX<double> one(1), fone(1);
    one << 1;
    fone << 0.5;
    EXPECT_TRUE(std::holds_alternative<NoFit>(fit_weibull_line(one, fone)));
}

TEST(EmpiricalCdf, DropsFOneAndZeroBin)
{
    auto cdf = empirical_cdf(table_from({{1, 50}, {2, 30}, {4, 20}}), 1);
    auto& p = std::get<CdfPoints<double>>(cdf);
    ASSERT_EQ(p.size(), 2);
    EXPECT_EQ(p.lifetime[0], 1);
    EXPECT_DOUBLE_EQ(p.cumulative[0], 0.5);
    EXPECT_EQ(p.lifetime[1], 2);
    EXPECT_DOUBLE_EQ(p.cumulative[1], 0.8);
}

TEST(EmpiricalCdf, ExclusionCascadeGivesNoFit)
{
    auto cdf = empirical_cdf(table_from({{0, 10}, {1, 10}}), 1);
    EXPECT_TRUE(std::holds_alternative<NoFit>(cdf));
}

TEST(EmpiricalCdf, TooFewSamples)
{
    auto cdf = empirical_cdf(table_from({{1, 10}, {2, 10}}), 30);
    ASSERT_TRUE(std::holds_alternative<NoFit>(cdf));
    EXPECT_EQ(std::get<NoFit>(cdf).reason, "insufficient samples");
}

TEST(EmpiricalCdf, StrictlyIncreasing)
{
    auto table = weibull_table(0.3, 4.0, 5000, 8);
    auto cdf = empirical_cdf(table, 30);
    auto& p = std::get<CdfPoints<double>>(cdf);
    for (Eigen::Index i = 1; i < p.size(); ++i)
    {
        EXPECT_GT(p.cumulative[i], p.cumulative[i - 1]);
        EXPECT_GT(p.lifetime[i], p.lifetime[i - 1]);
    }
}

TEST(CentralPoint, GeometricCenter)
{
    ArrayX<double> x(3);
    x << 1, 4, 16;
    EXPECT_EQ(central_point_index(x), 1);
}

TEST(CentralPoint, TieGoesToLowerLifetime)
{
    ArrayX<double> x(4);
    x << 1, 2, 4, 8;
    EXPECT_EQ(central_point_index(x), 1);
}

TEST(CentralPoint, ExclusionOnExactInputMatchesFullFit)
{
    auto points = exact_points(0.4, 9.0);
    auto full = weibull_of(fit_weibull(points));
    auto excl = fit_weibull_excluding_central(points);
    ASSERT_TRUE(std::holds_alternative<FitResult>(excl));
    EXPECT_EQ(std::get<FitResult>(excl).variant, FitVariant::weibull_excl_central);
    EXPECT_EQ(std::get<FitResult>(excl).n_points, points.size() - 1);
    EXPECT_NEAR(weibull_of(excl).k, full.k, 1e-10);
    EXPECT_NEAR(weibull_of(excl).lambda, full.lambda, 1e-8);
}

TEST(CentralPoint, NeedsThreePointsAndValidOverride)
{
    auto points = exact_points(1.0, 1.0, 2);
    ASSERT_EQ(points.size(), 2);
    EXPECT_TRUE(std::holds_alternative<NoFit>(fit_weibull_excluding_central(points)));
    auto more = exact_points(1.0, 3.0, 10);
    EXPECT_THROW(fit_weibull_excluding_central(more, more.size()), std::out_of_range);
    EXPECT_TRUE(std::holds_alternative<FitResult>(fit_weibull_excluding_central(more, 0)));
}

TEST(PowerLaw, ExactCountsRecovered)
{
    CohortTable t = table_from({});
    for (int dt = 1; dt <= 60; ++dt)
    {
        t.histogram[dt] = static_cast<std::uint64_t>(std::llround(1e12 * std::pow(dt, -2.0)));
        t.total += t.histogram[dt];
    }
    auto fit = fit_powerlaw(t, 1);
    ASSERT_TRUE(std::holds_alternative<FitResult>(fit));
    EXPECT_NEAR(std::get<FitResult>(fit).powerlaw()->alpha, 2.0, 1e-9);
    EXPECT_NEAR(std::get<FitResult>(fit).powerlaw()->c, std::log(1e12), 1e-8);
}

TEST(PowerLaw, EmptyTailGivesNoFit)
{
    auto fit = fit_powerlaw(table_from({{1, 100}, {2, 50}}), 3);
    ASSERT_TRUE(std::holds_alternative<NoFit>(fit));
    EXPECT_EQ(std::get<NoFit>(fit).reason, "insufficient bins");
}

TEST(PowerLaw, SampleRecovery)
{
    auto t = powerlaw_table(2.6, 100000, 3);
    auto fit = fit_powerlaw(t, 1);
    ASSERT_TRUE(std::holds_alternative<FitResult>(fit));
    EXPECT_NEAR(std::get<FitResult>(fit).powerlaw()->alpha, 2.6, 0.26);
}

TEST(ChiSquared, ExactMatchIsZero)
{
    ArrayX<double> obs(5), exp(5);
    obs << 10, 20, 30, 7, 3;
    exp = obs;
    auto c = pooled_pearson(obs, exp);
    EXPECT_EQ(c.chi2, 0.0);
    EXPECT_FALSE(c.zero_dof);
    EXPECT_EQ(c.bins, 4); // the 3 joins the 7
    EXPECT_EQ(c.reduced, 0.0);
}

TEST(ChiSquared, PoolingHandComputed)
{
    ArrayX<double> obs(4), exp(4);
    obs << 12, 1, 4, 9;
    exp << 10, 2, 4, 10;
    // Groups: {12|10}, {1+4|2+4}, {9|10}
    auto c = pooled_pearson(obs, exp);
    EXPECT_EQ(c.bins, 3);
    EXPECT_NEAR(c.chi2, 4.0 / 10 + 1.0 / 6 + 1.0 / 10, 1e-12);
    EXPECT_NEAR(c.reduced, c.chi2, 1e-12);
}

TEST(ChiSquared, FewBinsFlagZeroDof)
{
    ArrayX<double> obs(2), exp(2);
    obs << 50, 50;
    exp << 40, 60;
    auto c = pooled_pearson(obs, exp);
    EXPECT_TRUE(c.zero_dof);
    EXPECT_TRUE(std::isnan(c.reduced));
    EXPECT_GT(c.chi2, 0.0);
}

TEST(ChiSquared, OwnParametersGiveReducedNearOne)
{
    std::vector<double> reduced;
    for (std::uint64_t seed = 1; seed <= 9; ++seed)
    {
        auto table = weibull_table(0.5, 8.0, 100000, seed);
        FitResult truth;
        truth.params = WeibullParams<double>{0.5, 8.0};
        reduced.push_back(chi_squared(table, truth).reduced);
    }
    double m = median(reduced);
    EXPECT_GE(m, 0.5);
    EXPECT_LE(m, 2.0);
}

TEST(ChiSquared, MisspecifiedModelGrowsLinearly)
{
    // Power law fitted to Weibull data: chi2 per sample stays put as N doubles.
    auto small = weibull_table(0.5, 8.0, 50000, 4);
    auto large = weibull_table(0.5, 8.0, 100000, 5);
    auto fs = std::get<FitResult>(fit_cohort(small, FitVariant::powerlaw));
    auto fl = std::get<FitResult>(fit_cohort(large, FitVariant::powerlaw));
    double ratio = fl.chi2 / fs.chi2;
    EXPECT_GT(ratio, 1.6);
    EXPECT_LT(ratio, 2.4);
}

TEST(ChiSquared, ExpectedCountsSumToObserved)
{
    auto table = weibull_table(0.3, 5.0, 20000, 6);
    auto fit = std::get<FitResult>(fit_cohort(table, FitVariant::weibull));
    auto e = expected_counts(table, fit);
    EXPECT_NEAR(e.expected.sum(), e.observed.sum(), 1e-6);
    EXPECT_NEAR(e.observed.sum(), double(table.in_range()), 1e-9);
}

TEST(Recovery, WeibullSampleWithinFivePercent)
{
    auto table = weibull_table(0.2, 5.0, 100000, 11);
    auto fit = fit_cohort(table, FitVariant::weibull);
    EXPECT_NEAR(weibull_of(fit).k, 0.2, 0.01);
    EXPECT_NEAR(weibull_of(fit).lambda, 5.0, 0.5);
}

TEST(Recovery, ErrorShrinksWithSampleSize)
{
    auto median_error = [](std::uint64_t n) {
        std::vector<double> err;
        for (std::uint64_t seed = 1; seed <= 20; ++seed)
        {
            auto fit = fit_cohort(weibull_table(0.5, 8.0, n, seed * 7919 + n), FitVariant::weibull);
            err.push_back(std::abs(weibull_of(fit).k - 0.5));
        }
        return median(err);
    };
    double e3 = median_error(1000), e4 = median_error(10000), e5 = median_error(100000);
    EXPECT_GT(e3, e4);
    EXPECT_GT(e4, e5);
}

TEST(Evolution, SeriesAndGaps)
{
    CohortSet tables;
    tables[1950] = weibull_table(0.3, 5.0, 5000, 1);
    tables[1950].cohort_year = 1950;
    tables[1951] = table_from({{2, 5}, {3, 5}});
    tables[1951].cohort_year = 1951;
    std::vector<FitVariant> variants = {FitVariant::weibull, FitVariant::powerlaw};
    auto series = parameter_evolution(tables, EntityKind::node, variants);
    ASSERT_EQ(series.size(), 2u);
    EXPECT_EQ(series[0].variant, FitVariant::weibull);
    ASSERT_EQ(series[0].points.size(), 1u);
    EXPECT_EQ(series[0].points[0].cohort_year, 1950);
    ASSERT_EQ(series[0].gaps.size(), 1u);
    EXPECT_EQ(series[0].gaps[0].cohort_year, 1951);
    EXPECT_EQ(series[0].gaps[0].reason, "insufficient samples");
}

TEST(Evolution, SingleCohort)
{
    CohortSet tables;
    tables[1990] = weibull_table(0.3, 5.0, 5000, 2);
    std::vector<FitVariant> variants = {FitVariant::weibull};
    auto series = parameter_evolution(tables, EntityKind::node, variants);
    EXPECT_EQ(series.at(0).points.size(), 1u);
}

TEST(Evolution, ThreadCountDoesNotChangeResults)
{
    CohortSet tables;
    for (int y = 0; y < 12; ++y)
        tables[1950 + y] = weibull_table(0.25, 4.0 + y * 0.2, 4000, 100 + y);
    std::vector<FitVariant> variants = {FitVariant::powerlaw, FitVariant::weibull, FitVariant::weibull_excl_central};
    auto one = parameter_evolution(tables, EntityKind::node, variants, {}, 1);
    auto four = parameter_evolution(tables, EntityKind::node, variants, {}, 4);
    ASSERT_EQ(one.size(), four.size());
    for (std::size_t s = 0; s < one.size(); ++s)
    {
        ASSERT_EQ(one[s].points.size(), four[s].points.size());
        for (std::size_t i = 0; i < one[s].points.size(); ++i)
        {
            const auto& a = one[s].points[i].fit;
            const auto& b = four[s].points[i].fit;
            EXPECT_EQ(std::memcmp(&a.chi2, &b.chi2, sizeof(double)), 0);
            if (a.weibull())
            {
                EXPECT_EQ(a.weibull()->k, b.weibull()->k);
                EXPECT_EQ(a.weibull()->lambda, b.weibull()->lambda);
            }
            else
            {
                EXPECT_EQ(a.powerlaw()->alpha, b.powerlaw()->alpha);
            }
        }
    }
}

TEST(Evolution, VariantNames)
{
    auto v = parse_fit_variants("weibull,powerlaw,weibull,weibull-excl-central");
    EXPECT_EQ(v, (std::vector<FitVariant>{FitVariant::weibull, FitVariant::powerlaw,
                                          FitVariant::weibull_excl_central}));
    EXPECT_THROW(parse_fit_variants("weibull,lognormal"), std::invalid_argument);
}
