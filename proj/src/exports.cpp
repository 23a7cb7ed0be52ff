#include "collabtime/exports.hpp"

#include "collabtime/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <fmt/format.h>

namespace collabtime
{

namespace
{

std::string number(double v) { return std::isnan(v) ? std::string() : fmt::format("{}", v); }

void cohort_rows(std::string& buf, const CohortSet& tables)
{
    for (const auto& [year, table] : tables)
        for (int dt = 0; dt <= table.max_lifetime(); ++dt)
            if (auto n = table.count(dt))
                fmt::format_to(std::back_inserter(buf), "{}\t{}\t{}\t{}\n", to_string(table.kind), year, dt, n);
}

void total_rows(std::string& buf, const CohortSet& tables)
{
    for (const auto& [year, table] : tables)
        fmt::format_to(std::back_inserter(buf), "{}\t{}\t{}\t{}\t{}\n", to_string(table.kind), year,
                       table.total, table.truncated_count, table.max_lifetime());
}

}  // namespace

void write_cohorts_tsv(std::ostream& out, const CohortSet& nodes, const CohortSet& edges)
{
    std::string buf = fmt::format("# collabtime {} cohorts\nkind\tt0\tdt\tcount\n", tool_version());
    cohort_rows(buf, nodes);
    cohort_rows(buf, edges);
    out << buf;
}

void write_cohort_totals_tsv(std::ostream& out, const CohortSet& nodes, const CohortSet& edges)
{
    std::string buf = fmt::format("# collabtime {} cohort_totals\nkind\tt0\ttotal\ttruncated_count\tmax_lifetime\n",
                                  tool_version());
    total_rows(buf, nodes);
    total_rows(buf, edges);
    out << buf;
}

void write_fits_tsv(std::ostream& out, std::span<const ParameterSeries> series, const FitOptions& options)
{
    std::string buf = fmt::format(
        "# collabtime {} fits; weibull: OLS of log(-log(1-F)) on log dt with F = cumulative/total, "
        "points with dt=0, F=0 or F=1 excluded; powerlaw: OLS of log count on log dt, dt >= xmin={}; "
        "chi2: Pearson on counts, bins pooled until expected >= {}, reduced = chi2/(bins-2)\n"
        "kind\tvariant\tt0\tk\tlambda\talpha\tc\tchi2\treduced_chi2\tn_points\tn_samples\tstatus\n",
        tool_version(), options.xmin, options.min_expected);

    for (const auto& s : series)
    {
        // Interleave fits and gaps by cohort year.
        std::size_t p = 0;
        std::size_t g = 0;
        while (p < s.points.size() || g < s.gaps.size())
        {
            const bool take_point =
                g >= s.gaps.size() || (p < s.points.size() && s.points[p].cohort_year < s.gaps[g].cohort_year);
            if (take_point)
            {
                const auto& pt = s.points[p++];
                const auto& fit = pt.fit;
                std::string k, lambda, alpha, c;
                if (const auto* w = fit.weibull())
                {
                    k = number(w->k);
                    lambda = number(w->lambda);
                }
                else if (const auto* pl = fit.powerlaw())
                {
                    alpha = number(pl->alpha);
                    c = number(pl->c);
                }
                fmt::format_to(std::back_inserter(buf), "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                               to_string(s.kind), to_string(s.variant), pt.cohort_year, k, lambda, alpha, c,
                               number(fit.chi2), number(fit.reduced_chi2), fit.n_points, fit.n_samples,
                               fit.zero_dof ? "ok:zero_dof" : "ok");
            }
            else
            {
                const auto& gap = s.gaps[g++];
                fmt::format_to(std::back_inserter(buf), "{}\t{}\t{}\t\t\t\t\t\t\t\t\tnofit:{}\n", to_string(s.kind),
                               to_string(s.variant), gap.cohort_year, gap.reason);
            }
        }
    }
    out << buf;
}

void write_single_year_tsv(std::ostream& out, std::span<const SingleYearPoint> points, int threshold)
{
    std::string buf = fmt::format("# collabtime {} single_year; single means dt <= {}\nt0\tfraction\tsingle\ttotal\n",
                                  tool_version(), threshold);
    for (const auto& p : points)
        fmt::format_to(std::back_inserter(buf), "{}\t{}\t{}\t{}\n", p.cohort_year, p.fraction, p.single, p.total);
    out << buf;
}

}  // namespace collabtime
