#pragma once

#include "collabtime/cohorts.hpp"
#include "collabtime/ingest.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace collabtime
{

struct WeibullLaw
{
    double k = 0.2;
    double lambda = 5.0;
};

struct PowerLawLaw
{
    double alpha = 2.0;
    int xmin = 1;
};

/// Every participant gets the same lifetime.
struct FixedLaw
{
    double lifetime = 0.0;
};

using LifetimeLaw = std::variant<WeibullLaw, PowerLawLaw, FixedLaw>;

struct CohortSpec
{
    int year = 0;
    std::uint64_t new_nodes = 0;
    LifetimeLaw law = WeibullLaw{};
    double mean_team_size = 3.0;
    double events_per_node_year = 0.2;
};

/// Ground truth for synthetic data.
///
/// A participant of cohort t0 first completes a project in year
/// t0 + ceil(tau_project), so its entry time t0 + ceil(tau) - tau floors to t0.
/// A drawn lifetime L is realized as the integer lifetime
/// max(ceil(L), round(tau)), measured from entry: the realized lifetime CDF
/// equals the law's CDF at every integer year. Careers are cut at year_max.
struct CohortSchedule
{
    double tau_project = 2.0;
    int year_max = 2020;
    std::vector<CohortSpec> cohorts; ///< strictly increasing years

    void validate() const;
};

/// {"tau_project": 2, "year_max": 2020, "cohorts": [{"years": [1950, 1979],
///  "new_nodes": 1000, "law": {"kind": "weibull", "k": 0.2, "lambda": [5, 7.5]},
///  "mean_team_size": 3, "events_per_node_year": 0.2, "interp": "linear"}]}
///
/// "year" names a single cohort; "years" a closed range. Any numeric field may
/// be a [from, to] pair interpolated across the range ("linear" or "geometric").
CohortSchedule schedule_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const CohortSchedule& schedule);
CohortSchedule load_schedule(const std::filesystem::path& path);

/// Inverse-transform sample of Weibull(k, lambda): lambda * (-ln(1 - u))^(1/k).
double sample_weibull(double k, double lambda, double u);

/// Discrete power law P(x) = x^-alpha / zeta(alpha, xmin) for integer x >= xmin.
/// Inverse transform on a tabulated CDF, with a continuous Pareto tail beyond
/// the table.
class DiscretePowerLaw
{
  public:
    DiscretePowerLaw(double alpha, int xmin, int table_size = 100000);

    double alpha() const { return alpha_; }
    int xmin() const { return xmin_; }
    double pmf(int x) const;
    double cdf(int x) const;

    std::int64_t sample(double u) const;

  private:
    double alpha_;
    int xmin_;
    double norm_;
    std::vector<double> cdf_;
};

/// Draws one continuous-or-integer lifetime from `law`.
class LifetimeSampler
{
  public:
    explicit LifetimeSampler(const LifetimeLaw& law);

    double operator()(std::mt19937_64& rng) const;

    /// P(ceil(L) <= x), for checking realized integer lifetimes.
    double cdf_of_ceil(int x) const;

  private:
    LifetimeLaw law_;
    std::optional<DiscretePowerLaw> powerlaw_;
};

/// The integer lifetimes generate_dataset realizes, without building events.
/// Visits (cohort year, lifetime) per emitted participant.
void sample_node_lifetimes(const CohortSchedule& schedule, std::uint64_t seed,
                           const std::function<void(const Lifetime&)>& visit);

/// Same draws bucketed straight into cohort tables; cohorts are sampled in
/// parallel and merged in year order.
CohortSet sample_node_cohorts(const CohortSchedule& schedule, std::uint64_t seed, int max_lifetime,
                              unsigned threads = 1);

struct GenerateStats
{
    std::uint64_t participants = 0;
    std::uint64_t dropped_participants = 0; ///< first project after year_max
    std::uint64_t censored_careers = 0;
    std::uint64_t events = 0;
    std::uint64_t reduced_teams = 0; ///< teams cut short for lack of co-active participants
};

/// Emits events ordered by (year, sequence). Deterministic in (schedule, seed).
GenerateStats generate_dataset(const CohortSchedule& schedule, std::uint64_t seed,
                               const std::function<void(const CollaborationEvent&)>& sink);

}  // namespace collabtime
