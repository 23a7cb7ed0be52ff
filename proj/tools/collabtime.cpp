// collabtime: generate, analyze and sensitivity commands.

#include "collabtime/pipeline.hpp"
#include "collabtime/synth.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <sstream>

namespace ct = collabtime;

namespace
{

struct AnalyzeFlags
{
    std::string config_path;
    std::vector<std::string> inputs;
    std::string format;
    std::string delimiter;
    std::string list_separator;
    double tau_project = 2.0;
    std::string duration_model;
    double sigma = 0.0;
    std::uint64_t seed = 0;
    int max_lifetime = 60;
    std::uint64_t min_samples = 30;
    int xmin = 1;
    std::string edge_mode;
    std::string variants;
    std::string window;
    int single_year_threshold = 0;
    unsigned threads = 1;
    std::string out;
    std::size_t memory_budget_mb = 2048;
    std::string spill_dir;
    bool export_edges = false;

    std::vector<CLI::Option*> given;
};

char separator_char(const std::string& s, const char* what)
{
    if (s == "\\t" || s == "tab")
        return '\t';
    if (s.size() != 1)
        throw std::invalid_argument(fmt::format("{} must be a single character", what));
    return s[0];
}

void add_analyze_flags(CLI::App& cmd, AnalyzeFlags& f)
{
    cmd.add_option("--config", f.config_path, "JSON run config or a previous manifest.json; flags override it")
        ->check(CLI::ExistingFile);
    auto opt = [&](CLI::Option* o) { f.given.push_back(o); };
    opt(cmd.add_option("--input", f.inputs, "event file (repeatable)"));
    opt(cmd.add_option("--format", f.format, "delimited|json-lines"));
    opt(cmd.add_option("--delimiter", f.delimiter, "field delimiter (default ',')"));
    opt(cmd.add_option("--list-separator", f.list_separator, "member list separator (default ';')"));
    opt(cmd.add_option("--tau-project", f.tau_project, "project duration in years (default 2)"));
    opt(cmd.add_option("--duration-model", f.duration_model, "fixed|gaussian"));
    opt(cmd.add_option("--sigma", f.sigma, "gaussian duration spread"));
    opt(cmd.add_option("--seed", f.seed, "seed for gaussian durations"));
    opt(cmd.add_option("--max-lifetime", f.max_lifetime, "truncation limit in years (default 60)"));
    opt(cmd.add_option("--min-samples", f.min_samples, "smallest cohort to fit (default 30)"));
    opt(cmd.add_option("--xmin", f.xmin, "power-law lower cutoff (default 1)"));
    opt(cmd.add_option("--edge-mode", f.edge_mode, "merged|per-collab"));
    opt(cmd.add_option("--variants", f.variants, "comma list of powerlaw,weibull,weibull-excl-central"));
    opt(cmd.add_option("--window", f.window, "completion-year window, e.g. 1800:2020"));
    opt(cmd.add_option("--single-year-threshold", f.single_year_threshold,
                       "dt at or below which a participant is single-year (default round(tau))"));
    opt(cmd.add_option("--out", f.out, "output directory"));
    opt(cmd.add_flag("--export-edges", f.export_edges, "also write edge_intervals.tsv"));
    opt(cmd.add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber));
    opt(cmd.add_option("--memory-budget-mb", f.memory_budget_mb, "edge buffer size before spilling"));
    opt(cmd.add_option("--spill-dir", f.spill_dir, "directory for spill files"));
}

bool given(const AnalyzeFlags& f, std::string_view name)
{
    for (const auto* o : f.given)
        if (o->check_lname(std::string(name.substr(2))) && o->count() > 0)
            return true;
    return false;
}

ct::RunConfig build_config(const AnalyzeFlags& f)
{
    ct::RunConfig c;
    if (!f.config_path.empty())
    {
        std::ifstream in(f.config_path);
        c = ct::run_config_from_json(nlohmann::json::parse(in), c);
    }
    if (given(f, "--input"))
        c.inputs.assign(f.inputs.begin(), f.inputs.end());
    if (given(f, "--format"))
    {
        c.format = ct::parse_input_format(f.format);
        if (f.format == "tsv" && !given(f, "--delimiter"))
            c.schema.delimiter = '\t';
    }
    if (given(f, "--delimiter"))
        c.schema.delimiter = separator_char(f.delimiter, "--delimiter");
    if (given(f, "--list-separator"))
        c.schema.list_separator = separator_char(f.list_separator, "--list-separator");
    if (given(f, "--tau-project"))
        c.tau_project = f.tau_project;
    if (given(f, "--duration-model"))
        c.duration = ct::parse_duration_kind(f.duration_model);
    if (given(f, "--sigma"))
        c.sigma = f.sigma;
    if (given(f, "--seed"))
        c.seed = f.seed;
    if (given(f, "--max-lifetime"))
        c.max_lifetime = f.max_lifetime;
    if (given(f, "--min-samples"))
        c.min_samples = f.min_samples;
    if (given(f, "--xmin"))
        c.xmin = f.xmin;
    if (given(f, "--edge-mode"))
        c.edge_mode = ct::parse_edge_mode(f.edge_mode);
    if (given(f, "--variants"))
        c.variants = ct::parse_fit_variants(f.variants);
    if (given(f, "--window"))
        c.window = ct::parse_window(f.window);
    if (given(f, "--single-year-threshold"))
        c.single_year_threshold = f.single_year_threshold;
    if (given(f, "--out"))
        c.out = f.out;
    if (given(f, "--export-edges"))
        c.export_edges = f.export_edges;
    if (given(f, "--threads"))
        c.threads = f.threads;
    if (given(f, "--memory-budget-mb"))
        c.memory_budget_mb = f.memory_budget_mb;
    if (given(f, "--spill-dir"))
        c.spill_dir = f.spill_dir;
    if (c.inputs.empty())
        throw std::invalid_argument("no input given (use --input or a config with \"inputs\")");
    c.validate();
    return c;
}

void report_ingest(const ct::AnalysisResult& r)
{
    const auto& in = r.ingest;
    std::cerr << fmt::format("rows {} parsed {} malformed {} outside window {} duplicate members {}\n", in.rows,
                             in.parsed, in.malformed, in.skipped_window, in.duplicates_removed);
    for (std::size_t i = 0; i < std::min<std::size_t>(r.row_errors.size(), 5); ++i)
        std::cerr << fmt::format("  line {}: {}\n", r.row_errors[i].line, r.row_errors[i].message);
}

int cmd_generate(const std::string& schedule_path, std::uint64_t seed, const std::string& out_path,
                 const std::string& format_name)
{
    auto schedule = ct::load_schedule(schedule_path);
    auto format = ct::parse_input_format(format_name);
    std::filesystem::path out(out_path);
    if (out.has_parent_path())
        std::filesystem::create_directories(out.parent_path());
    std::ofstream file(out, std::ios::binary | std::ios::trunc);
    if (!file)
        throw std::runtime_error(fmt::format("cannot write '{}'", out.string()));

    ct::EventWriter writer(file, format);
    auto stats = ct::generate_dataset(schedule, seed, [&](const ct::CollaborationEvent& e) { writer.write(e); });
    file.close();
    if (!file)
        throw std::runtime_error(fmt::format("error writing '{}'", out.string()));

    nlohmann::json manifest = {
        {"tool", "collabtime"},
        {"version", ct::tool_version()},
        {"command", "generate"},
        {"seed", seed},
        {"format", ct::to_string(format)},
        {"output", out.filename().string()},
        {"schedule", ct::to_json(schedule)},
        {"counters",
         {{"participants", stats.participants},
          {"dropped_participants", stats.dropped_participants},
          {"censored_careers", stats.censored_careers},
          {"events", stats.events},
          {"reduced_teams", stats.reduced_teams}}},
    };
    std::ofstream(out.string() + ".manifest.json") << manifest.dump(2) << '\n';
    std::cerr << fmt::format("{} events from {} participants -> {}\n", stats.events, stats.participants,
                             out.string());
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cohort lifetime analysis of temporal collaboration networks"};
    app.set_version_flag("--version", std::string(ct::tool_version()));
    app.require_subcommand(1);

    std::string schedule_path;
    std::uint64_t gen_seed = 0;
    std::string gen_out;
    std::string gen_format = "delimited";
    auto* gen = app.add_subcommand("generate", "write a synthetic event file from a cohort schedule");
    gen->add_option("--schedule", schedule_path, "cohort schedule (JSON)")->required()->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_seed, "random seed");
    gen->add_option("--out", gen_out, "event file to write")->required();
    gen->add_option("--format", gen_format, "delimited|json-lines");

    AnalyzeFlags analyze_flags;
    auto* analyze = app.add_subcommand("analyze", "build cohorts and fit lifetime distributions");
    add_analyze_flags(*analyze, analyze_flags);

    AnalyzeFlags sweep_flags;
    std::vector<double> tau_values;
    std::vector<std::string> gaussians;
    auto* sensitivity = app.add_subcommand("sensitivity", "refit under several collaboration-duration models");
    add_analyze_flags(*sensitivity, sweep_flags);
    sensitivity->add_option("--tau-values", tau_values, "fixed durations to sweep, e.g. 0.25,1,2,4")
        ->delimiter(',');
    sensitivity->add_option("--gaussian", gaussians, "gaussian duration TAU:SIGMA (repeatable)");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*gen)
            return cmd_generate(schedule_path, gen_seed, gen_out, gen_format);

        if (*analyze)
        {
            auto config = build_config(analyze_flags);
            auto result = ct::run_analyze(config);
            report_ingest(result);
            std::cerr << fmt::format("{} node cohorts, {} edge cohorts -> {}\n", result.node_tables.size(),
                                     result.edge_tables.size(), config.out.string());
            return 0;
        }

        if (*sensitivity)
        {
            auto base = build_config(sweep_flags);
            std::vector<ct::DurationSpec> sweep;
            for (double tau : tau_values)
                sweep.push_back(ct::parse_duration_spec(fmt::format("fixed:{}", tau)));
            for (const auto& g : gaussians)
                sweep.push_back(ct::parse_duration_spec("gaussian:" + g));
            auto report = ct::run_sensitivity(base, sweep, [](const ct::RunConfig& c) {
                auto r = ct::run_analyze(c);
                std::cerr << fmt::format("{}: {} node cohorts\n", c.out.string(), r.node_tables.size());
                return r;
            });
            std::filesystem::create_directories(base.out);
            std::ofstream out(base.out / "sensitivity.tsv", std::ios::binary | std::ios::trunc);
            ct::write_sensitivity(out, report);
            for (auto kind : {ct::EntityKind::node, ct::EntityKind::edge})
            {
                auto fmt_opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.4f}", *v) : "n/a"; };
                std::cerr << fmt::format("{}: max pairwise |dk| {}, max |dk| from {} {}\n", ct::to_string(kind),
                                         fmt_opt(report.max_pairwise_dk(kind)),
                                         report.sweep[report.baseline].label(),
                                         fmt_opt(report.max_baseline_dk(kind)));
            }
            return 0;
        }
    }
    catch (const std::exception& e)
    {
        std::cerr << "collabtime: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
