#include "collabtime/cohorts.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace collabtime
{

std::string_view to_string(EntityKind kind) { return kind == EntityKind::node ? "node" : "edge"; }

EdgeLifetimeMode parse_edge_mode(std::string_view name)
{
    if (name == "merged")
        return EdgeLifetimeMode::merged;
    if (name == "per-collab" || name == "per_collab" || name == "per-collaboration")
        return EdgeLifetimeMode::per_collaboration;
    throw std::invalid_argument(fmt::format("unknown edge mode '{}'", name));
}

std::string_view to_string(EdgeLifetimeMode mode)
{
    return mode == EdgeLifetimeMode::merged ? "merged" : "per-collab";
}

int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

Lifetime node_lifetime(double first_entry, double last_activity)
{
    if (!(last_activity >= first_entry))
    {
        throw std::domain_error(fmt::format("last activity {} precedes first entry {}",
                                            last_activity, first_entry));
    }
    return {static_cast<int>(std::floor(first_entry)), round_half_up(last_activity - first_entry)};
}

Lifetime node_lifetime(const NodeActivity& activity)
{
    return node_lifetime(activity.first_entry, activity.last_activity);
}

std::vector<Lifetime> edge_lifetimes(std::span<const Interval> intervals, EdgeLifetimeMode mode)
{
    std::vector<Lifetime> out;
    if (intervals.empty())
        return out;
    if (mode == EdgeLifetimeMode::merged)
    {
        out.push_back(node_lifetime(intervals.front().creation, intervals.back().removal));
        return out;
    }
    out.reserve(intervals.size());
    for (const auto& iv : intervals)
        out.push_back(node_lifetime(iv.creation, iv.removal));
    return out;
}

std::vector<Lifetime> edge_lifetimes(const TemporalEdge& edge, EdgeLifetimeMode mode)
{
    return edge_lifetimes(edge.intervals, mode);
}

//---------------------------------------------------------------------------//

CohortBuilder::CohortBuilder(EntityKind kind, int max_lifetime)
    : kind_(kind), max_lifetime_(max_lifetime)
{
    if (max_lifetime_ < 1)
        throw std::invalid_argument(fmt::format("max_lifetime must be >= 1, got {}", max_lifetime_));
}

void CohortBuilder::add(const Lifetime& lifetime)
{
    if (lifetime.span < 0)
        throw std::domain_error(fmt::format("negative lifetime {}", lifetime.span));
    auto [it, inserted] = tables_.try_emplace(lifetime.cohort_year);
    auto& table = it->second;
    if (inserted)
    {
        table.kind = kind_;
        table.cohort_year = lifetime.cohort_year;
        table.histogram.assign(static_cast<std::size_t>(max_lifetime_) + 1, 0);
    }
    ++table.total;
    if (lifetime.span > max_lifetime_)
        ++table.truncated_count;
    else
        ++table.histogram[lifetime.span];
}

void CohortBuilder::merge(const CohortBuilder& other)
{
    if (other.kind_ != kind_ || other.max_lifetime_ != max_lifetime_)
        throw std::invalid_argument("cannot merge cohort builders with different layouts");
    for (const auto& [year, src] : other.tables_)
    {
        auto [it, inserted] = tables_.try_emplace(year, src);
        if (inserted)
            continue;
        auto& dst = it->second;
        for (std::size_t i = 0; i < dst.histogram.size(); ++i)
            dst.histogram[i] += src.histogram[i];
        dst.total += src.total;
        dst.truncated_count += src.truncated_count;
    }
}

CohortSet build_cohorts(EntityKind kind, std::span<const Lifetime> lifetimes, int max_lifetime)
{
    CohortBuilder builder(kind, max_lifetime);
    for (const auto& lt : lifetimes)
        builder.add(lt);
    return builder.release();
}

std::vector<SingleYearPoint> single_year_fraction(const CohortSet& tables, int threshold)
{
    std::vector<SingleYearPoint> out;
    out.reserve(tables.size());
    for (const auto& [year, table] : tables)
    {
        SingleYearPoint point{year, 0.0, 0, table.total};
        for (int dt = 0; dt <= std::min(threshold, table.max_lifetime()); ++dt)
            point.single += table.count(dt);
        point.fraction = table.total ? static_cast<double>(point.single) / table.total : 0.0;
        out.push_back(point);
    }
    return out;
}

}  // namespace collabtime
