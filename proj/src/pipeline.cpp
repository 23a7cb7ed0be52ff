#include "collabtime/pipeline.hpp"

#include "collabtime/exports.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#ifndef COLLABTIME_VERSION
#define COLLABTIME_VERSION "0.0.0"
#endif

namespace collabtime
{

std::string_view tool_version() { return COLLABTIME_VERSION; }

//---------------------------------------------------------------------------//
// RunConfig
//---------------------------------------------------------------------------//

DurationModel RunConfig::duration_model() const
{
    return duration == DurationKind::fixed ? DurationModel::fixed(tau_project)
                                           : DurationModel::gaussian(tau_project, sigma, seed);
}

int RunConfig::effective_single_year_threshold() const
{
    return single_year_threshold.value_or(round_half_up(tau_project));
}

FitOptions RunConfig::fit_options() const
{
    FitOptions options;
    options.min_samples = min_samples;
    options.xmin = xmin;
    return options;
}

void RunConfig::validate() const
{
    duration_model();
    if (max_lifetime < 1)
        throw std::invalid_argument(fmt::format("max_lifetime must be >= 1, got {}", max_lifetime));
    if (xmin < 1)
        throw std::invalid_argument(fmt::format("xmin must be >= 1, got {}", xmin));
    if (variants.empty())
        throw std::invalid_argument("no fit variants selected");
    if (window.min > window.max)
        throw std::invalid_argument("window start exceeds end");
}

nlohmann::json to_json(const RunConfig& c)
{
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& p : c.inputs)
        inputs.push_back(p.string());
    nlohmann::json variants = nlohmann::json::array();
    for (auto v : c.variants)
        variants.push_back(to_string(v));
    return {
        {"inputs", inputs},
        {"format", to_string(c.format)},
        {"schema",
         {{"project", c.schema.project},
          {"year", c.schema.year},
          {"members", c.schema.members},
          {"delimiter", std::string(1, c.schema.delimiter)},
          {"list_separator", std::string(1, c.schema.list_separator)}}},
        {"duration",
         {{"kind", to_string(c.duration)}, {"tau_project", c.tau_project}, {"sigma", c.sigma}, {"seed", c.seed}}},
        {"window", {c.window.min, c.window.max}},
        {"max_lifetime", c.max_lifetime},
        {"min_samples", c.min_samples},
        {"xmin", c.xmin},
        {"edge_mode", to_string(c.edge_mode)},
        {"variants", variants},
        {"single_year_threshold", c.effective_single_year_threshold()},
        {"out", c.out.string()},
        {"export_edges", c.export_edges},
    };
}

RunConfig run_config_from_json(const nlohmann::json& input, RunConfig c)
{
    const auto& doc = input.contains("config") && input["config"].is_object() ? input["config"] : input;
    auto single_char = [](const nlohmann::json& v, const char* what) {
        auto s = v.get<std::string>();
        if (s == "\\t" || s == "tab")
            return '\t';
        if (s.size() != 1)
            throw std::invalid_argument(fmt::format("{} must be a single character", what));
        return s[0];
    };

    if (doc.contains("inputs"))
    {
        c.inputs.clear();
        for (const auto& p : doc["inputs"])
            c.inputs.emplace_back(p.get<std::string>());
    }
    if (doc.contains("format"))
        c.format = parse_input_format(doc["format"].get<std::string>());
    if (doc.contains("schema"))
    {
        const auto& s = doc["schema"];
        c.schema.project = s.value("project", c.schema.project);
        c.schema.year = s.value("year", c.schema.year);
        c.schema.members = s.value("members", c.schema.members);
        if (s.contains("delimiter"))
            c.schema.delimiter = single_char(s["delimiter"], "delimiter");
        if (s.contains("list_separator"))
            c.schema.list_separator = single_char(s["list_separator"], "list_separator");
    }
    if (doc.contains("duration"))
    {
        const auto& d = doc["duration"];
        if (d.contains("kind"))
            c.duration = parse_duration_kind(d["kind"].get<std::string>());
        c.tau_project = d.value("tau_project", c.tau_project);
        c.sigma = d.value("sigma", c.sigma);
        c.seed = d.value("seed", c.seed);
    }
    if (doc.contains("window"))
    {
        const auto& w = doc["window"];
        if (w.is_string())
            c.window = parse_window(w.get<std::string>());
        else
            c.window = {w.at(0).get<double>(), w.at(1).get<double>()};
    }
    c.max_lifetime = doc.value("max_lifetime", c.max_lifetime);
    c.min_samples = doc.value("min_samples", c.min_samples);
    c.xmin = doc.value("xmin", c.xmin);
    if (doc.contains("edge_mode"))
        c.edge_mode = parse_edge_mode(doc["edge_mode"].get<std::string>());
    if (doc.contains("variants"))
    {
        const auto& v = doc["variants"];
        if (v.is_string())
        {
            c.variants = parse_fit_variants(v.get<std::string>());
        }
        else
        {
            c.variants.clear();
            for (const auto& name : v)
                c.variants.push_back(parse_fit_variant(name.get<std::string>()));
        }
    }
    if (doc.contains("single_year_threshold") && !doc["single_year_threshold"].is_null())
        c.single_year_threshold = doc["single_year_threshold"].get<int>();
    if (doc.contains("out"))
        c.out = doc["out"].get<std::string>();
    c.export_edges = doc.value("export_edges", c.export_edges);
    c.threads = doc.value("threads", c.threads);
    c.memory_budget_mb = doc.value("memory_budget_mb", c.memory_budget_mb);
    if (doc.contains("spill_dir"))
        c.spill_dir = doc["spill_dir"].get<std::string>();
    return c;
}

//---------------------------------------------------------------------------//
// Analyzer
//---------------------------------------------------------------------------//

namespace
{

AccumulatorOptions accumulator_options(const RunConfig& config)
{
    AccumulatorOptions options;
    options.memory_budget_bytes = config.memory_budget_mb << 20;
    options.spill_dir = config.spill_dir;
    options.threads = std::max(1u, config.threads);
    return options;
}

}  // namespace

Analyzer::Analyzer(RunConfig config)
    : config_(std::move(config)), model_(config_.duration_model()), builder_(accumulator_options(config_))
{
    config_.validate();
}

void Analyzer::add(const CollaborationEvent& event) { builder_.add_event(event, assign_duration(event, model_)); }

AnalysisResult Analyzer::finish(std::ostream* edge_export)
{
    AnalysisResult result;

    CohortBuilder nodes(EntityKind::node, config_.max_lifetime);
    builder_.for_each_node([&](const NodeActivity& node) { nodes.add(node_lifetime(node)); });

    const auto nparts = builder_.partition_count();
    std::vector<CohortBuilder> edge_parts(nparts, CohortBuilder(EntityKind::edge, config_.max_lifetime));
    std::vector<std::string> exports(edge_export ? nparts : 0);
    builder_.finish_edges([&](std::size_t p, const EdgeView& edge) {
        for (const auto& lt : edge_lifetimes(edge.intervals, config_.edge_mode))
            edge_parts[p].add(lt);
        if (edge_export)
        {
            for (const auto& iv : edge.intervals)
                fmt::format_to(std::back_inserter(exports[p]), "{}\t{}\t{}\t{}\n",
                               builder_.participant_name(edge.first), builder_.participant_name(edge.second),
                               iv.creation, iv.removal);
        }
    });
    CohortBuilder edges(EntityKind::edge, config_.max_lifetime);
    for (const auto& part : edge_parts)
        edges.merge(part);
    if (edge_export)
    {
        *edge_export << fmt::format("# collabtime {} edge_intervals\nfirst\tsecond\tcreation\tremoval\n",
                                    tool_version());
        for (const auto& chunk : exports)
            *edge_export << chunk;
    }

    result.node_tables = nodes.release();
    result.edge_tables = edges.release();
    result.accumulation = builder_.stats();

    const auto options = config_.fit_options();
    result.node_series =
        parameter_evolution(result.node_tables, EntityKind::node, config_.variants, options, config_.threads);
    result.edge_series =
        parameter_evolution(result.edge_tables, EntityKind::edge, config_.variants, options, config_.threads);
    result.single_year_threshold = config_.effective_single_year_threshold();
    result.single_year = single_year_fraction(result.node_tables, result.single_year_threshold);
    return result;
}

AnalysisResult analyze_events(const RunConfig& config, std::span<const CollaborationEvent> events)
{
    Analyzer analyzer(config);
    IngestCounters counters;
    for (const auto& event : events)
    {
        ++counters.rows;
        if (!config.window.contains(event.completion_year))
        {
            ++counters.skipped_window;
            continue;
        }
        ++counters.parsed;
        analyzer.add(event);
    }
    auto result = analyzer.finish();
    result.ingest = counters;
    return result;
}

AnalysisResult analyze_files(const RunConfig& config, std::ostream* edge_export)
{
    if (config.inputs.empty())
        throw IngestError("no input files given");
    // Fail on unreadable paths before doing any work.
    std::vector<std::unique_ptr<std::ifstream>> sources;
    for (const auto& path : config.inputs)
        sources.push_back(open_event_source(path));

    Analyzer analyzer(config);
    IngestCounters total;
    std::vector<RowError> errors;
    CollaborationEvent event;
    for (std::size_t i = 0; i < sources.size(); ++i)
    {
        EventReader reader(*sources[i], config.format, config.schema, config.window);
        while (reader.next(event))
            analyzer.add(event);
        const auto& c = reader.counters();
        total.rows += c.rows;
        total.parsed += c.parsed;
        total.malformed += c.malformed;
        total.skipped_window += c.skipped_window;
        total.duplicates_removed += c.duplicates_removed;
        for (const auto& e : reader.errors())
        {
            if (errors.size() >= EventReader::max_recorded_errors)
                break;
            errors.push_back({e.line, sources.size() > 1
                                          ? fmt::format("{}: {}", config.inputs[i].string(), e.message)
                                          : e.message});
        }
        sources[i].reset();
    }
    auto result = analyzer.finish(edge_export);
    result.ingest = total;
    result.row_errors = std::move(errors);
    return result;
}

namespace
{

std::ofstream open_output(const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    return out;
}

}  // namespace

void write_outputs(const AnalysisResult& result, const RunConfig& config, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    {
        auto out = open_output(dir / "cohorts.tsv");
        write_cohorts_tsv(out, result.node_tables, result.edge_tables);
    }
    {
        auto out = open_output(dir / "cohort_totals.tsv");
        write_cohort_totals_tsv(out, result.node_tables, result.edge_tables);
    }
    {
        std::vector<ParameterSeries> all = result.node_series;
        all.insert(all.end(), result.edge_series.begin(), result.edge_series.end());
        auto out = open_output(dir / "fits.tsv");
        write_fits_tsv(out, all, config.fit_options());
    }
    {
        auto out = open_output(dir / "single_year.tsv");
        write_single_year_tsv(out, result.single_year, result.single_year_threshold);
    }

    const auto& in = result.ingest;
    const auto& acc = result.accumulation;
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& e : result.row_errors)
        errors.push_back({{"line", e.line}, {"message", e.message}});
    nlohmann::json manifest = {
        {"tool", "collabtime"},
        {"version", tool_version()},
        {"command", "analyze"},
        {"config", to_json(config)},
        {"counters",
         {{"rows", in.rows},
          {"parsed", in.parsed},
          {"malformed", in.malformed},
          {"skipped_window", in.skipped_window},
          {"duplicates_removed", in.duplicates_removed},
          {"participants", acc.participants},
          {"edge_instances", acc.edge_instances},
          {"spill_flushes", acc.spill_flushes},
          {"spilled_instances", acc.spilled_instances},
          {"node_cohorts", result.node_tables.size()},
          {"edge_cohorts", result.edge_tables.size()}}},
        {"row_errors", errors},
        {"notes",
         {"careers active at the end of the data are counted as ended at their last activity",
          "edge cohorts use edge entry time",
          "dt is rounded half up to whole years; t0 is floor(entry time)"}},
        {"outputs", {"cohorts.tsv", "cohort_totals.tsv", "fits.tsv", "single_year.tsv"}},
    };
    auto out = open_output(dir / "manifest.json");
    out << manifest.dump(2) << '\n';
}

AnalysisResult run_analyze(const RunConfig& config)
{
    config.validate();
    std::filesystem::create_directories(config.out);
    AnalysisResult result;
    if (config.export_edges)
    {
        auto edges = open_output(config.out / "edge_intervals.tsv");
        result = analyze_files(config, &edges);
    }
    else
    {
        result = analyze_files(config);
    }
    write_outputs(result, config, config.out);
    return result;
}

//---------------------------------------------------------------------------//
// Sensitivity
//---------------------------------------------------------------------------//

std::string DurationSpec::label() const
{
    if (kind == DurationKind::fixed)
        return fmt::format("fixed-{}", tau);
    return fmt::format("gaussian-{}-{}", tau, sigma);
}

DurationSpec parse_duration_spec(std::string_view text)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (start <= text.size())
    {
        auto pos = std::min(text.find(':', start), text.size());
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
    auto num = [&](std::string_view s) {
        try
        {
            std::size_t used = 0;
            double v = std::stod(std::string(s), &used);
            if (used != s.size())
                throw std::invalid_argument("");
            return v;
        }
        catch (const std::exception&)
        {
            throw std::invalid_argument(fmt::format("bad duration spec '{}'", text));
        }
    };
    DurationSpec spec;
    if (parts.size() == 1)
    {
        spec.tau = num(parts[0]);
    }
    else if (parts[0] == "fixed" && parts.size() == 2)
    {
        spec.tau = num(parts[1]);
    }
    else if (parts[0] == "gaussian" && (parts.size() == 3 || parts.size() == 2))
    {
        spec.kind = DurationKind::gaussian;
        spec.tau = num(parts[1]);
        spec.sigma = parts.size() == 3 ? num(parts[2]) : 0.0;
    }
    else
    {
        throw std::invalid_argument(fmt::format("bad duration spec '{}'", text));
    }
    // Validates tau/sigma.
    if (spec.kind == DurationKind::fixed)
        DurationModel::fixed(spec.tau);
    else
        DurationModel::gaussian(spec.tau, spec.sigma, 0);
    return spec;
}

std::optional<double> SensitivityReport::max_pairwise_dk(EntityKind kind) const
{
    std::optional<double> out;
    for (const auto& row : rows)
        if (row.kind == kind && row.max_pairwise_dk)
            out = std::max(out.value_or(0.0), *row.max_pairwise_dk);
    return out;
}

std::optional<double> SensitivityReport::max_baseline_dk(EntityKind kind) const
{
    std::optional<double> out;
    for (const auto& row : rows)
        if (row.kind == kind && row.max_baseline_dk)
            out = std::max(out.value_or(0.0), *row.max_baseline_dk);
    return out;
}

SensitivityReport run_sensitivity(const RunConfig& base, std::span<const DurationSpec> sweep, const AnalyzeFn& analyze)
{
    if (sweep.size() < 2)
        throw std::invalid_argument("sensitivity sweep needs at least two duration models");

    SensitivityReport report;
    report.sweep.assign(sweep.begin(), sweep.end());
    for (std::size_t i = 0; i < sweep.size(); ++i)
    {
        const auto& s = sweep[i];
        if (s.kind == base.duration && s.tau == base.tau_project
            && (s.kind == DurationKind::fixed || s.sigma == base.sigma))
        {
            report.baseline = i;
            break;
        }
    }

    // k per (kind, year) per sweep point.
    std::map<std::pair<EntityKind, int>, std::vector<std::optional<double>>> table;
    for (std::size_t i = 0; i < sweep.size(); ++i)
    {
        RunConfig config = base;
        config.duration = sweep[i].kind;
        config.tau_project = sweep[i].tau;
        config.sigma = sweep[i].kind == DurationKind::gaussian ? sweep[i].sigma : 0.0;
        config.out = base.out / sweep[i].label();
        if (std::find(config.variants.begin(), config.variants.end(), report.variant) == config.variants.end())
            config.variants.push_back(report.variant);

        auto result = analyze(config);
        for (const auto* series : {&result.node_series, &result.edge_series})
        {
            for (const auto& s : *series)
            {
                if (s.variant != report.variant)
                    continue;
                for (const auto& point : s.points)
                {
                    auto& ks = table[{s.kind, point.cohort_year}];
                    ks.resize(sweep.size());
                    ks[i] = point.fit.weibull()->k;
                }
                for (const auto& gap : s.gaps)
                    table[{s.kind, gap.cohort_year}].resize(sweep.size());
            }
        }
    }

    for (auto& [key, ks] : table)
    {
        SensitivityRow row;
        row.kind = key.first;
        row.cohort_year = key.second;
        row.k = ks;
        const bool complete = std::all_of(ks.begin(), ks.end(), [](const auto& k) { return k.has_value(); });
        if (complete)
        {
            auto [lo, hi] = std::minmax_element(ks.begin(), ks.end());
            row.max_pairwise_dk = **hi - **lo;
            double dev = 0.0;
            for (const auto& k : ks)
                dev = std::max(dev, std::abs(*k - *ks[report.baseline]));
            row.max_baseline_dk = dev;
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

void write_sensitivity(std::ostream& out, const SensitivityReport& report)
{
    auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{}", *v) : std::string(); };
    std::string buf = fmt::format("# collabtime {} sensitivity; fitted {} k per duration model; baseline {}\nkind\tt0",
                                  tool_version(), to_string(report.variant), report.sweep[report.baseline].label());
    for (const auto& s : report.sweep)
        buf += fmt::format("\tk[{}]", s.label());
    buf += "\tmax_pairwise_dk\tmax_baseline_dk\n";
    for (const auto& row : report.rows)
    {
        buf += fmt::format("{}\t{}", to_string(row.kind), row.cohort_year);
        for (const auto& k : row.k)
            buf += "\t" + opt(k);
        buf += fmt::format("\t{}\t{}\n", opt(row.max_pairwise_dk), opt(row.max_baseline_dk));
    }
    for (auto kind : {EntityKind::node, EntityKind::edge})
    {
        buf += fmt::format("{}\tall", to_string(kind));
        for (std::size_t i = 0; i < report.sweep.size(); ++i)
            buf += "\t";
        buf += fmt::format("\t{}\t{}\n", opt(report.max_pairwise_dk(kind)), opt(report.max_baseline_dk(kind)));
    }
    out << buf;
}

}  // namespace collabtime
