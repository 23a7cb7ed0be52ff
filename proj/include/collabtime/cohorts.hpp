#pragma once

#include "collabtime/tempgraph.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

namespace collabtime
{

enum class EntityKind
{
    node,
    edge,
};

std::string_view to_string(EntityKind kind);

enum class EdgeLifetimeMode
{
    merged,            ///< one lifetime per pair, first creation to last removal
    per_collaboration, ///< one lifetime per merged interval
};

EdgeLifetimeMode parse_edge_mode(std::string_view name);
std::string_view to_string(EdgeLifetimeMode mode);

/// Entry cohort and lifetime in whole years.
struct Lifetime
{
    int cohort_year = 0;
    int span = 0;

    friend auto operator<=>(const Lifetime&, const Lifetime&) = default;
};

/// floor(x + 0.5)
int round_half_up(double x);

/// Throws std::domain_error when last_activity precedes first_entry.
Lifetime node_lifetime(double first_entry, double last_activity);
Lifetime node_lifetime(const NodeActivity& activity);

std::vector<Lifetime> edge_lifetimes(std::span<const Interval> intervals, EdgeLifetimeMode mode);
std::vector<Lifetime> edge_lifetimes(const TemporalEdge& edge, EdgeLifetimeMode mode);

/// Lifetime histogram P(dt | t0) for one entry cohort.
struct CohortTable
{
    EntityKind kind = EntityKind::node;
    int cohort_year = 0;
    std::vector<std::uint64_t> histogram; ///< index dt in [0, max_lifetime]
    std::uint64_t total = 0;
    std::uint64_t truncated_count = 0;

    int max_lifetime() const { return static_cast<int>(histogram.size()) - 1; }
    std::uint64_t count(int span) const
    {
        return span >= 0 && span < static_cast<int>(histogram.size()) ? histogram[span] : 0;
    }
    std::uint64_t in_range() const { return total - truncated_count; }

    friend bool operator==(const CohortTable&, const CohortTable&) = default;
};

using CohortSet = std::map<int, CohortTable>;

/// Accumulates lifetimes into per-cohort tables. Builders over disjoint parts
/// of a stream merge by addition, so any partitioning gives the same tables.
class CohortBuilder
{
  public:
    CohortBuilder(EntityKind kind, int max_lifetime);

    void add(const Lifetime& lifetime);
    void merge(const CohortBuilder& other);

    EntityKind kind() const { return kind_; }
    int max_lifetime() const { return max_lifetime_; }
    const CohortSet& tables() const { return tables_; }
    CohortSet release() { return std::move(tables_); }

  private:
    EntityKind kind_;
    int max_lifetime_;
    CohortSet tables_;
};

CohortSet build_cohorts(EntityKind kind, std::span<const Lifetime> lifetimes, int max_lifetime = 60);

struct SingleYearPoint
{
    int cohort_year = 0;
    double fraction = 0.0;
    std::uint64_t single = 0;
    std::uint64_t total = 0;
};

/// Per cohort: count(dt <= threshold) / total. With the tau shift, a
/// participant with exactly one project has dt == round(tau), which is the
/// default threshold chosen by callers.
std::vector<SingleYearPoint> single_year_fraction(const CohortSet& tables, int threshold);

}  // namespace collabtime
