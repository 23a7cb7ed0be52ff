#include "collabtime/synth.hpp"

#include "collabtime/hash.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

namespace collabtime
{

namespace
{

constexpr std::uint64_t lifetime_stream = 1;
constexpr std::uint64_t career_stream = 2;
constexpr std::uint64_t team_stream = 3;

std::mt19937_64 stream_rng(std::uint64_t seed, int year, std::uint64_t stream)
{
    return std::mt19937_64(mix_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(year)), stream));
}

void validate_law(const LifetimeLaw& law)
{
    std::visit(
        [](const auto& l) {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, WeibullLaw>)
            {
                if (!(l.k > 0.0) || !(l.lambda > 0.0))
                    throw std::invalid_argument(fmt::format("weibull law needs k > 0 and lambda > 0 (k={}, lambda={})", l.k, l.lambda));
            }
            else if constexpr (std::is_same_v<T, PowerLawLaw>)
            {
                if (!(l.alpha > 1.0) || l.xmin < 1)
                    throw std::invalid_argument(fmt::format("power law needs alpha > 1 and xmin >= 1 (alpha={}, xmin={})", l.alpha, l.xmin));
            }
            else
            {
                if (!(l.lifetime >= 0.0))
                    throw std::invalid_argument("fixed lifetime must be nonnegative");
            }
        },
        law);
}

}  // namespace

void CohortSchedule::validate() const
{
    if (!(tau_project > 0.0))
        throw std::invalid_argument("schedule tau_project must be positive");
    for (std::size_t i = 0; i < cohorts.size(); ++i)
    {
        const auto& c = cohorts[i];
        if (i > 0 && c.year <= cohorts[i - 1].year)
            throw std::invalid_argument(fmt::format("cohort years must strictly increase (at {})", c.year));
        if (!(c.mean_team_size >= 1.0))
            throw std::invalid_argument(fmt::format("cohort {}: mean_team_size must be >= 1", c.year));
        if (!(c.events_per_node_year >= 0.0))
            throw std::invalid_argument(fmt::format("cohort {}: events_per_node_year must be >= 0", c.year));
        validate_law(c.law);
    }
}

//---------------------------------------------------------------------------//
// JSON schedule
//---------------------------------------------------------------------------//

namespace
{

double field_at(const nlohmann::json& v, double frac, bool geometric)
{
    if (v.is_number())
        return v.get<double>();
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    {
        const double a = v[0].get<double>();
        const double b = v[1].get<double>();
        if (geometric)
        {
            if (!(a > 0.0 && b > 0.0))
                throw std::invalid_argument("geometric interpolation needs positive endpoints");
            return a * std::pow(b / a, frac);
        }
        return a + (b - a) * frac;
    }
    throw std::invalid_argument(fmt::format("expected a number or [from, to], got {}", v.dump()));
}

double field_or(const nlohmann::json& obj, const char* key, double fallback, double frac, bool geometric)
{
    auto it = obj.find(key);
    return it == obj.end() ? fallback : field_at(*it, frac, geometric);
}

nlohmann::json law_to_json(const LifetimeLaw& law)
{
    return std::visit(
        [](const auto& l) -> nlohmann::json {
            using T = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<T, WeibullLaw>)
                return {{"kind", "weibull"}, {"k", l.k}, {"lambda", l.lambda}};
            else if constexpr (std::is_same_v<T, PowerLawLaw>)
                return {{"kind", "powerlaw"}, {"alpha", l.alpha}, {"xmin", l.xmin}};
            else
                return {{"kind", "fixed"}, {"lifetime", l.lifetime}};
        },
        law);
}

}  // namespace

CohortSchedule schedule_from_json(const nlohmann::json& doc)
{
    CohortSchedule schedule;
    schedule.tau_project = doc.value("tau_project", schedule.tau_project);
    schedule.year_max = doc.value("year_max", schedule.year_max);
    if (!doc.contains("cohorts") || !doc["cohorts"].is_array())
        throw std::invalid_argument("schedule needs a 'cohorts' array");

    for (const auto& entry : doc["cohorts"])
    {
        int first = 0;
        int last = 0;
        if (entry.contains("years"))
        {
            first = entry["years"].at(0).get<int>();
            last = entry["years"].at(1).get<int>();
        }
        else
        {
            first = last = entry.at("year").get<int>();
        }
        if (last < first)
            throw std::invalid_argument(fmt::format("cohort range {}..{} is reversed", first, last));
        const auto interp = entry.value("interp", std::string("linear"));
        if (interp != "linear" && interp != "geometric")
            throw std::invalid_argument(fmt::format("unknown interp '{}'", interp));
        const bool geometric = interp == "geometric";
        const auto& law = entry.at("law");
        const auto kind = law.at("kind").get<std::string>();

        for (int year = first; year <= last; ++year)
        {
            const double frac = last == first ? 0.0 : double(year - first) / double(last - first);
            CohortSpec spec;
            spec.year = year;
            spec.new_nodes = static_cast<std::uint64_t>(
                std::llround(field_at(entry.at("new_nodes"), frac, geometric)));
            spec.mean_team_size = field_or(entry, "mean_team_size", spec.mean_team_size, frac, geometric);
            spec.events_per_node_year =
                field_or(entry, "events_per_node_year", spec.events_per_node_year, frac, geometric);
            if (kind == "weibull")
                spec.law = WeibullLaw{field_at(law.at("k"), frac, geometric),
                                      field_at(law.at("lambda"), frac, geometric)};
            else if (kind == "powerlaw")
                spec.law = PowerLawLaw{field_at(law.at("alpha"), frac, geometric),
                                       static_cast<int>(std::lround(field_or(law, "xmin", 1.0, frac, geometric)))};
            else if (kind == "fixed")
                spec.law = FixedLaw{field_at(law.at("lifetime"), frac, geometric)};
            else
                throw std::invalid_argument(fmt::format("unknown lifetime law '{}'", kind));
            schedule.cohorts.push_back(spec);
        }
    }
    std::sort(schedule.cohorts.begin(), schedule.cohorts.end(),
              [](const CohortSpec& a, const CohortSpec& b) { return a.year < b.year; });
    schedule.validate();
    return schedule;
}

nlohmann::json to_json(const CohortSchedule& schedule)
{
    nlohmann::json cohorts = nlohmann::json::array();
    for (const auto& c : schedule.cohorts)
    {
        cohorts.push_back({{"year", c.year},
                           {"new_nodes", c.new_nodes},
                           {"law", law_to_json(c.law)},
                           {"mean_team_size", c.mean_team_size},
                           {"events_per_node_year", c.events_per_node_year}});
    }
    return {{"tau_project", schedule.tau_project}, {"year_max", schedule.year_max}, {"cohorts", cohorts}};
}

CohortSchedule load_schedule(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error(fmt::format("cannot read schedule '{}'", path.string()));
    auto doc = nlohmann::json::parse(in, nullptr, false, true);
    if (doc.is_discarded())
        throw std::runtime_error(fmt::format("schedule '{}' is not valid JSON", path.string()));
    return schedule_from_json(doc);
}

//---------------------------------------------------------------------------//
// Samplers
//---------------------------------------------------------------------------//

double sample_weibull(double k, double lambda, double u)
{
    return lambda * std::pow(-std::log1p(-u), 1.0 / k);
}

DiscretePowerLaw::DiscretePowerLaw(double alpha, int xmin, int table_size)
    : alpha_(alpha), xmin_(xmin)
{
    if (!(alpha > 1.0) || xmin < 1 || table_size < 1)
        throw std::invalid_argument("discrete power law needs alpha > 1, xmin >= 1");
    cdf_.resize(static_cast<std::size_t>(table_size));
    // Sum smallest terms first for accuracy.
    std::vector<double> terms(cdf_.size());
    for (std::size_t i = 0; i < terms.size(); ++i)
        terms[i] = std::pow(static_cast<double>(xmin_ + static_cast<std::int64_t>(i)), -alpha_);
    const double upper = static_cast<double>(xmin_) + table_size - 0.5;
    // Midpoint rule for the remaining tail sum of x^-alpha.
    double tail = std::pow(upper, 1.0 - alpha_) / (alpha_ - 1.0);
    double sum = tail;
    for (auto it = terms.rbegin(); it != terms.rend(); ++it)
        sum += *it;
    norm_ = sum;
    double running = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i)
    {
        running += terms[i];
        cdf_[i] = running / norm_;
    }
}

double DiscretePowerLaw::pmf(int x) const
{
    return x < xmin_ ? 0.0 : std::pow(static_cast<double>(x), -alpha_) / norm_;
}

double DiscretePowerLaw::cdf(int x) const
{
    if (x < xmin_)
        return 0.0;
    auto i = static_cast<std::size_t>(x - xmin_);
    if (i < cdf_.size())
        return cdf_[i];
    return 1.0 - std::pow(x + 0.5, 1.0 - alpha_) / (alpha_ - 1.0) / norm_;
}

std::int64_t DiscretePowerLaw::sample(double u) const
{
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    if (it != cdf_.end())
        return xmin_ + (it - cdf_.begin());
    // Continuous Pareto tail above the table, rounded to the nearest integer.
    const double upper = static_cast<double>(xmin_) + static_cast<double>(cdf_.size()) - 0.5;
    const double v = (u - cdf_.back()) / (1.0 - cdf_.back());
    const double x = upper * std::pow(1.0 - std::min(v, 1.0 - 1e-16), -1.0 / (alpha_ - 1.0));
    return std::max<std::int64_t>(xmin_ + static_cast<std::int64_t>(cdf_.size()),
                                  static_cast<std::int64_t>(std::floor(x + 0.5)));
}

LifetimeSampler::LifetimeSampler(const LifetimeLaw& law) : law_(law)
{
    validate_law(law_);
    if (auto* p = std::get_if<PowerLawLaw>(&law_))
        powerlaw_.emplace(p->alpha, p->xmin);
}

double LifetimeSampler::operator()(std::mt19937_64& rng) const
{
    const double u = open_unit(rng());
    if (auto* w = std::get_if<WeibullLaw>(&law_))
        return sample_weibull(w->k, w->lambda, u);
    if (powerlaw_)
        return static_cast<double>(powerlaw_->sample(u));
    return std::get<FixedLaw>(law_).lifetime;
}

double LifetimeSampler::cdf_of_ceil(int x) const
{
    if (auto* w = std::get_if<WeibullLaw>(&law_))
        return x <= 0 ? 0.0 : -std::expm1(-std::pow(x / w->lambda, w->k));
    if (powerlaw_)
        return powerlaw_->cdf(x);
    return std::ceil(std::get<FixedLaw>(law_).lifetime) <= x ? 1.0 : 0.0;
}

//---------------------------------------------------------------------------//
// Careers
//---------------------------------------------------------------------------//

namespace
{

struct Career
{
    int first_year;
    int span; ///< years from first to last completion
    bool censored;
};

class CareerPlanner
{
  public:
    explicit CareerPlanner(const CohortSchedule& schedule)
        : tau_ceil_(static_cast<int>(std::ceil(schedule.tau_project))),
          tau_round_(round_half_up(schedule.tau_project)), year_max_(schedule.year_max)
    {
    }

    /// nullopt when the first project would fall after year_max.
    std::optional<Career> plan(int cohort_year, double lifetime) const
    {
        const int first = cohort_year + tau_ceil_;
        if (first > year_max_)
            return std::nullopt;
        const double ceiled = std::ceil(lifetime);
        // Lifetimes beyond any calendar range collapse to a cap; they are
        // censored at year_max below anyway.
        const int dt = ceiled > 1e6 ? 1000000 : static_cast<int>(ceiled);
        int span = std::max(dt - tau_round_, 0);
        bool censored = false;
        if (first + span > year_max_)
        {
            span = year_max_ - first;
            censored = true;
        }
        return Career{first, span, censored};
    }

    int realized_lifetime(const Career& career) const { return career.span + tau_round_; }

  private:
    int tau_ceil_;
    int tau_round_;
    int year_max_;
};

}  // namespace

void sample_node_lifetimes(const CohortSchedule& schedule, std::uint64_t seed,
                           const std::function<void(const Lifetime&)>& visit)
{
    schedule.validate();
    CareerPlanner planner(schedule);
    for (const auto& cohort : schedule.cohorts)
    {
        LifetimeSampler sampler(cohort.law);
        auto rng = stream_rng(seed, cohort.year, lifetime_stream);
        for (std::uint64_t i = 0; i < cohort.new_nodes; ++i)
        {
            auto career = planner.plan(cohort.year, sampler(rng));
            if (career)
                visit({cohort.year, planner.realized_lifetime(*career)});
        }
    }
}

CohortSet sample_node_cohorts(const CohortSchedule& schedule, std::uint64_t seed, int max_lifetime,
                              unsigned threads)
{
    schedule.validate();
    CareerPlanner planner(schedule);
    const auto n = schedule.cohorts.size();
    std::vector<CohortBuilder> parts(n, CohortBuilder(EntityKind::node, max_lifetime));
    auto run = [&](std::size_t c) {
        const auto& cohort = schedule.cohorts[c];
        LifetimeSampler sampler(cohort.law);
        auto rng = stream_rng(seed, cohort.year, lifetime_stream);
        for (std::uint64_t i = 0; i < cohort.new_nodes; ++i)
        {
            auto career = planner.plan(cohort.year, sampler(rng));
            if (career)
                parts[c].add({cohort.year, planner.realized_lifetime(*career)});
        }
    };
    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
    if (workers <= 1)
    {
        for (std::size_t c = 0; c < n; ++c)
            run(c);
    }
    else
    {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (auto c = next++; c < n; c = next++)
                    run(c);
            });
        for (auto& t : pool)
            t.join();
    }
    CohortBuilder merged(EntityKind::node, max_lifetime);
    for (const auto& part : parts)
        merged.merge(part);
    return merged.release();
}

GenerateStats generate_dataset(const CohortSchedule& schedule, std::uint64_t seed,
                               const std::function<void(const CollaborationEvent&)>& sink)
{
    schedule.validate();
    CareerPlanner planner(schedule);
    GenerateStats stats;

    // Activity slots: which participants complete a project in each year.
    std::map<int, std::vector<std::uint32_t>> slots;
    std::uint64_t next_id = 0;
    std::vector<int> years;
    for (const auto& cohort : schedule.cohorts)
    {
        LifetimeSampler sampler(cohort.law);
        auto lifetimes = stream_rng(seed, cohort.year, lifetime_stream);
        auto careers = stream_rng(seed, cohort.year, career_stream);
        for (std::uint64_t i = 0; i < cohort.new_nodes; ++i)
        {
            // Draw first so the lifetime stream matches sample_node_lifetimes.
            auto career = planner.plan(cohort.year, sampler(lifetimes));
            if (!career)
            {
                ++stats.dropped_participants;
                continue;
            }
            if (next_id > std::numeric_limits<std::uint32_t>::max())
                throw std::length_error("synthetic participant count exceeds 32-bit ids");
            const auto id = static_cast<std::uint32_t>(next_id++);
            ++stats.participants;
            stats.censored_careers += career->censored ? 1 : 0;

            years.clear();
            years.push_back(career->first_year);
            if (career->span > 0)
            {
                years.push_back(career->first_year + career->span);
                std::poisson_distribution<int> interior(cohort.events_per_node_year * career->span);
                const int m = cohort.events_per_node_year > 0.0 ? interior(careers) : 0;
                std::uniform_int_distribution<int> when(career->first_year,
                                                        career->first_year + career->span);
                for (int j = 0; j < m; ++j)
                    years.push_back(when(careers));
                std::sort(years.begin(), years.end());
                years.erase(std::unique(years.begin(), years.end()), years.end());
            }
            for (int y : years)
                slots[y].push_back(id);
        }
    }

    auto team_mean_for = [&](int year) {
        auto it = std::upper_bound(schedule.cohorts.begin(), schedule.cohorts.end(), year,
                                   [](int y, const CohortSpec& c) { return y < c.year; });
        return it == schedule.cohorts.begin() ? schedule.cohorts.front().mean_team_size
                                              : std::prev(it)->mean_team_size;
    };

    CollaborationEvent event;
    for (auto& [year, members] : slots)
    {
        auto rng = stream_rng(seed, year, team_stream);
        std::shuffle(members.begin(), members.end(), rng);
        std::poisson_distribution<int> extra(std::max(team_mean_for(year) - 1.0, 0.0));
        const bool solo_only = team_mean_for(year) <= 1.0;
        std::size_t pos = 0;
        std::uint64_t seq = 0;
        while (pos < members.size())
        {
            std::size_t size = 1 + static_cast<std::size_t>(solo_only ? 0 : extra(rng));
            if (size > members.size() - pos)
            {
                size = members.size() - pos;
                ++stats.reduced_teams;
            }
            event.project_id = fmt::format("e{}-{}", year, seq++);
            event.completion_year = year;
            event.participants.resize(size);
            for (std::size_t j = 0; j < size; ++j)
                event.participants[j] = fmt::format("n{}", members[pos + j]);
            pos += size;
            ++stats.events;
            sink(event);
        }
        std::vector<std::uint32_t>().swap(members);
    }
    return stats;
}

}  // namespace collabtime
