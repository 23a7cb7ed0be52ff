#include "collabtime/fitting.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace collabtime
{

std::string_view to_string(FitVariant variant)
{
    switch (variant)
    {
    case FitVariant::powerlaw:
        return "powerlaw";
    case FitVariant::weibull:
        return "weibull";
    case FitVariant::weibull_excl_central:
        return "weibull-excl-central";
    }
    return "unknown";
}

FitVariant parse_fit_variant(std::string_view name)
{
    if (name == "powerlaw" || name == "power-law")
        return FitVariant::powerlaw;
    if (name == "weibull")
        return FitVariant::weibull;
    if (name == "weibull-excl-central" || name == "weibull_excl_central")
        return FitVariant::weibull_excl_central;
    throw std::invalid_argument(fmt::format("unknown fit variant '{}'", name));
}

std::vector<FitVariant> parse_fit_variants(std::string_view list)
{
    std::vector<FitVariant> out;
    std::size_t start = 0;
    while (start <= list.size())
    {
        auto pos = std::min(list.find(',', start), list.size());
        auto token = list.substr(start, pos - start);
        if (!token.empty())
        {
            auto v = parse_fit_variant(token);
            if (std::find(out.begin(), out.end(), v) == out.end())
                out.push_back(v);
        }
        start = pos + 1;
    }
    if (out.empty())
        throw std::invalid_argument("no fit variants selected");
    return out;
}

//---------------------------------------------------------------------------//

std::variant<CdfPoints<double>, NoFit> empirical_cdf(const CohortTable& table, std::uint64_t min_samples)
{
    if (table.in_range() < min_samples || table.in_range() == 0)
        return NoFit{"insufficient samples"};

    std::vector<double> xs;
    std::vector<double> fs;
    const double total = static_cast<double>(table.total);
    std::uint64_t cumulative = 0;
    for (int dt = 0; dt <= table.max_lifetime(); ++dt)
    {
        const auto n = table.count(dt);
        if (n == 0)
            continue;
        cumulative += n;
        const double f = static_cast<double>(cumulative) / total;
        if (dt == 0 || f <= 0.0 || f >= 1.0)
            continue;
        xs.push_back(dt);
        fs.push_back(f);
    }
    if (xs.empty())
        return NoFit{"no usable points after transform exclusions"};

    CdfPoints<double> points;
    points.lifetime = Eigen::Map<const ArrayX<double>>(xs.data(), static_cast<Eigen::Index>(xs.size()));
    points.cumulative = Eigen::Map<const ArrayX<double>>(fs.data(), static_cast<Eigen::Index>(fs.size()));
    points.n_samples = table.in_range();
    return points;
}

namespace
{

FitOutcome weibull_result(const ArrayX<double>& x, const ArrayX<double>& f, FitVariant variant,
                          std::uint64_t n_samples)
{
    auto fitted = fit_weibull_line(x, f);
    if (auto* nofit = std::get_if<NoFit>(&fitted))
        return *nofit;
    FitResult result;
    result.variant = variant;
    result.params = std::get<WeibullParams<double>>(fitted);
    result.n_points = static_cast<int>(x.size());
    result.n_samples = n_samples;
    return result;
}

}  // namespace

FitOutcome fit_weibull(const CdfPoints<double>& points)
{
    return weibull_result(points.lifetime, points.cumulative, FitVariant::weibull, points.n_samples);
}

FitOutcome fit_weibull_excluding_central(const CdfPoints<double>& points,
                                         std::optional<Eigen::Index> central_index)
{
    const auto n = points.size();
    if (n < 3)
        return NoFit{"too few usable points"};
    const auto drop = central_index.value_or(central_point_index(points.lifetime));
    if (drop < 0 || drop >= n)
        throw std::out_of_range(fmt::format("central index {} outside [0, {})", drop, n));

    ArrayX<double> x(n - 1);
    ArrayX<double> f(n - 1);
    x << points.lifetime.head(drop), points.lifetime.tail(n - drop - 1);
    f << points.cumulative.head(drop), points.cumulative.tail(n - drop - 1);
    return weibull_result(x, f, FitVariant::weibull_excl_central, points.n_samples);
}

FitOutcome fit_powerlaw(const CohortTable& table, int xmin)
{
    xmin = std::max(xmin, 1);
    std::vector<double> xs;
    std::vector<double> ys;
    std::uint64_t samples = 0;
    for (int dt = xmin; dt <= table.max_lifetime(); ++dt)
    {
        const auto n = table.count(dt);
        if (n == 0)
            continue;
        xs.push_back(std::log(static_cast<double>(dt)));
        ys.push_back(std::log(static_cast<double>(n)));
        samples += n;
    }
    if (xs.size() < 2)
        return NoFit{"insufficient bins"};
    const auto size = static_cast<Eigen::Index>(xs.size());
    auto line = least_squares_line(Eigen::Map<const ArrayX<double>>(xs.data(), size),
                                   Eigen::Map<const ArrayX<double>>(ys.data(), size));
    if (!line)
        return NoFit{"degenerate lifetime range"};
    FitResult result;
    result.variant = FitVariant::powerlaw;
    result.params = PowerLawParams<double>{-line->slope, line->intercept};
    result.n_points = static_cast<int>(xs.size());
    result.n_samples = samples;
    return result;
}

//---------------------------------------------------------------------------//

BinExpectation expected_counts(const CohortTable& table, const FitResult& fit, int xmin)
{
    BinExpectation out;
    const int max_dt = table.max_lifetime();
    if (const auto* w = fit.weibull())
    {
        int first = 0;
        while (first <= max_dt && table.count(first) == 0)
            ++first;
        if (first > max_dt)
            return out;
        const int n = max_dt - first + 1;
        out.first_bin = first;
        out.observed.resize(n);
        out.expected.resize(n);
        double previous = 0.0;
        for (int i = 0; i < n; ++i)
        {
            const double cdf = weibull_cdf(static_cast<double>(first + i), *w);
            out.expected[i] = cdf - previous;
            out.observed[i] = static_cast<double>(table.count(first + i));
            previous = cdf;
        }
    }
    else
    {
        const auto& p = *fit.powerlaw();
        const int first = std::max(xmin, 1);
        if (first > max_dt)
            return out;
        const int n = max_dt - first + 1;
        out.first_bin = first;
        out.observed.resize(n);
        out.expected.resize(n);
        for (int i = 0; i < n; ++i)
        {
            out.expected[i] = std::pow(static_cast<double>(first + i), -p.alpha);
            out.observed[i] = static_cast<double>(table.count(first + i));
        }
    }
    const double mass = out.expected.sum();
    const double observed = out.observed.sum();
    if (mass > 0.0)
        out.expected *= observed / mass;
    return out;
}

ChiSquared chi_squared(const CohortTable& table, const FitResult& fit, int xmin, double min_expected)
{
    auto bins = expected_counts(table, fit, xmin);
    return pooled_pearson(bins.observed, bins.expected, min_expected);
}

FitOutcome fit_cohort(const CohortTable& table, FitVariant variant, const FitOptions& options)
{
    if (table.in_range() < options.min_samples || table.in_range() == 0)
        return NoFit{"insufficient samples"};

    FitOutcome outcome;
    if (variant == FitVariant::powerlaw)
    {
        outcome = fit_powerlaw(table, options.xmin);
    }
    else
    {
        auto cdf = empirical_cdf(table, options.min_samples);
        if (auto* nofit = std::get_if<NoFit>(&cdf))
            return *nofit;
        const auto& points = std::get<CdfPoints<double>>(cdf);
        outcome = variant == FitVariant::weibull
                      ? fit_weibull(points)
                      : fit_weibull_excluding_central(points, options.central_index);
    }
    if (auto* result = std::get_if<FitResult>(&outcome))
    {
        auto chi = chi_squared(table, *result, options.xmin, options.min_expected);
        result->chi2 = chi.chi2;
        result->reduced_chi2 = chi.reduced;
        result->zero_dof = chi.zero_dof;
    }
    return outcome;
}

std::vector<ParameterSeries> parameter_evolution(const CohortSet& tables, EntityKind kind,
                                                 std::span<const FitVariant> variants,
                                                 const FitOptions& options, unsigned threads)
{
    std::vector<const CohortTable*> ordered;
    ordered.reserve(tables.size());
    for (const auto& [_, table] : tables)
        ordered.push_back(&table);

    const std::size_t tasks = ordered.size() * variants.size();
    std::vector<FitOutcome> outcomes(tasks);
    auto run = [&](std::size_t task) {
        const auto& table = *ordered[task / variants.size()];
        outcomes[task] = fit_cohort(table, variants[task % variants.size()], options);
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(tasks)));
    if (workers <= 1)
    {
        for (std::size_t t = 0; t < tasks; ++t)
            run(t);
    }
    else
    {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (auto t = next++; t < tasks; t = next++)
                    run(t);
            });
        for (auto& t : pool)
            t.join();
    }

    std::vector<ParameterSeries> series(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v)
    {
        series[v].kind = kind;
        series[v].variant = variants[v];
    }
    for (std::size_t t = 0; t < tasks; ++t)
    {
        auto& s = series[t % variants.size()];
        const int year = ordered[t / variants.size()]->cohort_year;
        if (auto* result = std::get_if<FitResult>(&outcomes[t]))
            s.points.push_back({year, *result});
        else
            s.gaps.push_back({year, std::get<NoFit>(outcomes[t]).reason});
    }
    return series;
}

}  // namespace collabtime
