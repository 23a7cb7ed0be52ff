#pragma once

#include "collabtime/cohorts.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace collabtime
{

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

enum class FitVariant
{
    powerlaw,
    weibull,
    weibull_excl_central,
};

std::string_view to_string(FitVariant variant);
FitVariant parse_fit_variant(std::string_view name);
/// Comma-separated list, e.g. "powerlaw,weibull,weibull-excl-central".
std::vector<FitVariant> parse_fit_variants(std::string_view list);

template <typename Scalar>
struct WeibullParams
{
    Scalar k;      ///< shape
    Scalar lambda; ///< scale, years
};

template <typename Scalar>
struct PowerLawParams
{
    Scalar alpha; ///< P(dt) ~ dt^-alpha
    Scalar c;     ///< intercept of log count vs log dt
};

template <typename Scalar>
struct LineFit
{
    Scalar slope;
    Scalar intercept;
};

struct NoFit
{
    std::string reason;
};

//---------------------------------------------------------------------------//
// Closed forms
//---------------------------------------------------------------------------//

/// F(x) = 1 - exp(-(x/lambda)^k), evaluated with expm1 to keep small F exact.
template <typename Scalar>
Scalar weibull_cdf(Scalar x, const WeibullParams<Scalar>& p)
{
    using std::expm1;
    using std::pow;
    if (!(x > Scalar(0)))
        return Scalar(0);
    return -expm1(-pow(x / p.lambda, p.k));
}

template <typename Derived>
ArrayX<typename Derived::Scalar> weibull_cdf(const Eigen::ArrayBase<Derived>& x,
                                              const WeibullParams<typename Derived::Scalar>& p)
{
    return x.unaryExpr([&](auto v) { return weibull_cdf(v, p); });
}

/// Double-log transform log(-log(1 - F)); finite for 0 < F < 1.
template <typename Derived>
ArrayX<typename Derived::Scalar> weibull_linearize(const Eigen::ArrayBase<Derived>& cdf)
{
    using Scalar = typename Derived::Scalar;
    return cdf.unaryExpr([](Scalar f) {
        using std::log;
        using std::log1p;
        return log(-log1p(-f));
    });
}

//---------------------------------------------------------------------------//
// Regression
//---------------------------------------------------------------------------//

/// Ordinary least squares y = slope * x + intercept on centered sums.
/// Returns nullopt with fewer than two points or zero spread in x.
template <typename DerivedX, typename DerivedY>
std::optional<LineFit<typename DerivedX::Scalar>> least_squares_line(const Eigen::ArrayBase<DerivedX>& x,
                                                                     const Eigen::ArrayBase<DerivedY>& y)
{
    using Scalar = typename DerivedX::Scalar;
    eigen_assert(x.size() == y.size());
    if (x.size() < 2)
        return std::nullopt;
    const Scalar mx = x.mean();
    const Scalar my = y.mean();
    const ArrayX<Scalar> dx = x - mx;
    const Scalar sxx = dx.square().sum();
    if (!(sxx > Scalar(0)))
        return std::nullopt;
    const Scalar slope = (dx * (y - my)).sum() / sxx;
    return LineFit<Scalar>{slope, my - slope * mx};
}

/// Regress log(-log(1-F)) on log x: slope = k, intercept = -k log lambda.
template <typename DerivedX, typename DerivedF>
std::variant<WeibullParams<typename DerivedX::Scalar>, NoFit>
fit_weibull_line(const Eigen::ArrayBase<DerivedX>& lifetime, const Eigen::ArrayBase<DerivedF>& cdf)
{
    using Scalar = typename DerivedX::Scalar;
    if (lifetime.size() < 2)
        return NoFit{"too few usable points"};
    const ArrayX<Scalar> x = lifetime.log();
    const ArrayX<Scalar> y = weibull_linearize(cdf);
    auto line = least_squares_line(x, y);
    if (!line)
        return NoFit{"degenerate lifetime range"};
    if (!(line->slope > Scalar(0)))
        return NoFit{"nonpositive shape"};
    using std::exp;
    return WeibullParams<Scalar>{line->slope, exp(-line->intercept / line->slope)};
}

/// Index of the point whose log x lies nearest the midpoint of the log-x
/// range; ties (within a few ulps of the range) go to the lower x.
template <typename Derived>
Eigen::Index central_point_index(const Eigen::ArrayBase<Derived>& lifetime)
{
    using Scalar = typename Derived::Scalar;
    using std::abs;
    using std::log;
    const Scalar lo = log(lifetime.minCoeff());
    const Scalar hi = log(lifetime.maxCoeff());
    const Scalar mid = (lo + hi) / Scalar(2);
    const Scalar tol = (hi - lo) * Scalar(64) * std::numeric_limits<Scalar>::epsilon();
    Eigen::Index best = 0;
    Scalar best_dist = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < lifetime.size(); ++i)
    {
        const Scalar d = abs(log(lifetime[i]) - mid);
        if (d < best_dist - tol || (abs(d - best_dist) <= tol && lifetime[i] < lifetime[best]))
        {
            best = i;
            best_dist = d;
        }
    }
    return best;
}

//---------------------------------------------------------------------------//
// Goodness of fit
//---------------------------------------------------------------------------//

struct ChiSquared
{
    double chi2 = 0.0;
    double reduced = std::numeric_limits<double>::quiet_NaN();
    int bins = 0;          ///< groups after pooling
    bool zero_dof = false; ///< fewer than 3 bins: reduced is undefined
};

/// Pearson chi-squared over consecutive bins, pooling neighbours until each
/// group's expectation reaches `min_expected`; a short tail group joins the
/// last full one. Reduced chi-squared divides by (groups - 2).
template <typename DerivedO, typename DerivedE>
ChiSquared pooled_pearson(const Eigen::ArrayBase<DerivedO>& observed,
                          const Eigen::ArrayBase<DerivedE>& expected, double min_expected = 5.0)
{
    eigen_assert(observed.size() == expected.size());
    std::vector<double> obs_groups;
    std::vector<double> exp_groups;
    double o = 0.0;
    double e = 0.0;
    for (Eigen::Index i = 0; i < observed.size(); ++i)
    {
        o += static_cast<double>(observed[i]);
        e += static_cast<double>(expected[i]);
        if (e >= min_expected)
        {
            obs_groups.push_back(o);
            exp_groups.push_back(e);
            o = e = 0.0;
        }
    }
    if (o > 0.0 || e > 0.0)
    {
        if (obs_groups.empty())
        {
            obs_groups.push_back(o);
            exp_groups.push_back(e);
        }
        else
        {
            obs_groups.back() += o;
            exp_groups.back() += e;
        }
    }

    ChiSquared out;
    out.bins = static_cast<int>(obs_groups.size());
    for (std::size_t g = 0; g < obs_groups.size(); ++g)
    {
        const double diff = obs_groups[g] - exp_groups[g];
        if (exp_groups[g] > 0.0)
            out.chi2 += diff * diff / exp_groups[g];
        else if (obs_groups[g] > 0.0)
            out.chi2 = std::numeric_limits<double>::infinity();
    }
    out.zero_dof = out.bins < 3;
    if (!out.zero_dof)
        out.reduced = out.chi2 / (out.bins - 2);
    return out;
}

//---------------------------------------------------------------------------//
// Cohort-level fitting
//---------------------------------------------------------------------------//

/// Empirical CDF points of one cohort, one per nonzero histogram bin.
template <typename Scalar>
struct CdfPoints
{
    ArrayX<Scalar> lifetime;
    ArrayX<Scalar> cumulative;
    std::uint64_t n_samples = 0;

    Eigen::Index size() const { return lifetime.size(); }
};

struct FitResult
{
    FitVariant variant = FitVariant::weibull;
    std::variant<WeibullParams<double>, PowerLawParams<double>> params;
    double chi2 = std::numeric_limits<double>::quiet_NaN();
    double reduced_chi2 = std::numeric_limits<double>::quiet_NaN();
    bool zero_dof = false;
    int n_points = 0;
    std::uint64_t n_samples = 0;

    const WeibullParams<double>* weibull() const { return std::get_if<WeibullParams<double>>(&params); }
    const PowerLawParams<double>* powerlaw() const { return std::get_if<PowerLawParams<double>>(&params); }
};

using FitOutcome = std::variant<FitResult, NoFit>;

struct FitOptions
{
    std::uint64_t min_samples = 30;
    int xmin = 1;
    /// Overrides the log-midpoint choice of the central point.
    std::optional<Eigen::Index> central_index;
    double min_expected = 5.0;
};

/// F(dt) = (cumulative count up to dt) / total, truncated lifetimes included
/// in the denominator. Points with dt = 0, F = 0 or F = 1 are dropped since
/// the double-log transform is undefined there.
std::variant<CdfPoints<double>, NoFit> empirical_cdf(const CohortTable& table,
                                                      std::uint64_t min_samples = 30);

FitOutcome fit_weibull(const CdfPoints<double>& points);
FitOutcome fit_weibull_excluding_central(const CdfPoints<double>& points,
                                         std::optional<Eigen::Index> central_index = std::nullopt);

/// Least squares of log count on log dt over nonzero bins with dt >= xmin.
FitOutcome fit_powerlaw(const CohortTable& table, int xmin = 1);

/// Expected counts per bin under `fit`, over the bins chi_squared compares.
/// Weibull: bin dt holds F(dt) - F(dt-1); the first included bin (lowest
/// nonzero observed bin) absorbs the whole lower tail. Power law: dt^-alpha
/// over [xmin, max_lifetime]. Masses are renormalized over the included range
/// and scaled by the observed count in that range.
struct BinExpectation
{
    int first_bin = 0;
    ArrayX<double> observed;
    ArrayX<double> expected;
};
BinExpectation expected_counts(const CohortTable& table, const FitResult& fit, int xmin = 1);

ChiSquared chi_squared(const CohortTable& table, const FitResult& fit, int xmin = 1,
                       double min_expected = 5.0);

/// empirical_cdf / fit / chi_squared for one cohort and variant.
FitOutcome fit_cohort(const CohortTable& table, FitVariant variant, const FitOptions& options = {});

struct SeriesPoint
{
    int cohort_year = 0;
    FitResult fit;
};

struct SeriesGap
{
    int cohort_year = 0;
    std::string reason;
};

struct ParameterSeries
{
    EntityKind kind = EntityKind::node;
    FitVariant variant = FitVariant::weibull;
    std::vector<SeriesPoint> points; ///< sorted by cohort year
    std::vector<SeriesGap> gaps;
};

/// One series per variant. Fits run on up to `threads` workers; assembly is
/// ordered, so results do not depend on the thread count.
std::vector<ParameterSeries> parameter_evolution(const CohortSet& tables, EntityKind kind,
                                                 std::span<const FitVariant> variants,
                                                 const FitOptions& options = {},
                                                 unsigned threads = 1);

}  // namespace collabtime
