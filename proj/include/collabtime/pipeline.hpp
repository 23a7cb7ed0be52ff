#pragma once

#include "collabtime/cohorts.hpp"
#include "collabtime/fitting.hpp"
#include "collabtime/ingest.hpp"
#include "collabtime/tempgraph.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace collabtime
{

std::string_view tool_version();

struct RunConfig
{
    std::vector<std::filesystem::path> inputs;
    InputFormat format = InputFormat::delimited;
    Schema schema;

    DurationKind duration = DurationKind::fixed;
    double tau_project = 2.0;
    double sigma = 0.0;
    std::uint64_t seed = 0;

    YearWindow window;
    int max_lifetime = 60;
    std::uint64_t min_samples = 30;
    int xmin = 1;
    EdgeLifetimeMode edge_mode = EdgeLifetimeMode::merged;
    std::vector<FitVariant> variants = {FitVariant::powerlaw, FitVariant::weibull,
                                        FitVariant::weibull_excl_central};
    /// Defaults to round(tau_project): the lifetime of a one-project participant.
    std::optional<int> single_year_threshold;

    std::filesystem::path out = "out";
    bool export_edges = false;

    // Execution only; never changes results and is not echoed to the manifest.
    unsigned threads = 1;
    std::size_t memory_budget_mb = 2048;
    std::filesystem::path spill_dir;

    DurationModel duration_model() const;
    int effective_single_year_threshold() const;
    FitOptions fit_options() const;
    void validate() const;
};

/// Result-affecting fields only (see RunConfig::threads).
nlohmann::json to_json(const RunConfig& config);
/// Overlays the keys present in `doc` onto `base`; accepts a bare config or a
/// run manifest (whose "config" member is used).
RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig base = {});

struct AnalysisResult
{
    CohortSet node_tables;
    CohortSet edge_tables;
    std::vector<ParameterSeries> node_series;
    std::vector<ParameterSeries> edge_series;
    std::vector<SingleYearPoint> single_year;
    int single_year_threshold = 0;
    IngestCounters ingest;
    std::vector<RowError> row_errors;
    AccumulatorStats accumulation;
};

/// Streams events through node/edge accumulation, cohort building and fitting.
class Analyzer
{
  public:
    explicit Analyzer(RunConfig config);

    void add(const CollaborationEvent& event);

    /// Runs lifetime extraction and fitting. When `edge_export` is set, every
    /// merged edge interval is written there (partition order, then pair key).
    AnalysisResult finish(std::ostream* edge_export = nullptr);

  private:
    RunConfig config_;
    DurationModel model_;
    TemporalGraphBuilder builder_;
};

/// In-memory events; window filtering still applies.
AnalysisResult analyze_events(const RunConfig& config, std::span<const CollaborationEvent> events);

/// Reads config.inputs. Throws IngestError naming any unreadable input.
AnalysisResult analyze_files(const RunConfig& config, std::ostream* edge_export = nullptr);

/// Writes cohorts.tsv, cohort_totals.tsv, fits.tsv, single_year.tsv and
/// manifest.json into `dir`.
void write_outputs(const AnalysisResult& result, const RunConfig& config,
                   const std::filesystem::path& dir);

/// analyze_files + write_outputs into config.out.
AnalysisResult run_analyze(const RunConfig& config);

//---------------------------------------------------------------------------//
// Sensitivity sweep over duration models
//---------------------------------------------------------------------------//

struct DurationSpec
{
    DurationKind kind = DurationKind::fixed;
    double tau = 2.0;
    double sigma = 0.0;

    std::string label() const;
    friend bool operator==(const DurationSpec&, const DurationSpec&) = default;
};

/// "2", "fixed:2" or "gaussian:2:0.5".
DurationSpec parse_duration_spec(std::string_view text);

struct SensitivityRow
{
    EntityKind kind = EntityKind::node;
    int cohort_year = 0;
    std::vector<std::optional<double>> k; ///< per sweep point
    std::optional<double> max_pairwise_dk;
    std::optional<double> max_baseline_dk;
};

struct SensitivityReport
{
    std::vector<DurationSpec> sweep;
    std::size_t baseline = 0; ///< index into sweep
    FitVariant variant = FitVariant::weibull;
    std::vector<SensitivityRow> rows;

    /// Maxima over all cohort rows of `kind` with a fit at every sweep point.
    std::optional<double> max_pairwise_dk(EntityKind kind) const;
    std::optional<double> max_baseline_dk(EntityKind kind) const;
};

using AnalyzeFn = std::function<AnalysisResult(const RunConfig&)>;

/// Runs `analyze` once per sweep point (>= 2 required) and tabulates fitted
/// Weibull k per cohort. The baseline is the sweep point matching the base
/// config's duration model, or the first point when none matches.
SensitivityReport run_sensitivity(const RunConfig& base, std::span<const DurationSpec> sweep,
                                  const AnalyzeFn& analyze);

void write_sensitivity(std::ostream& out, const SensitivityReport& report);

}  // namespace collabtime
