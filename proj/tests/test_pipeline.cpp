#include "collabtime/pipeline.hpp"
#include "collabtime/synth.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

using namespace collabtime;
namespace fs = std::filesystem;

namespace
{

const char* const output_files[] = {"cohorts.tsv", "cohort_totals.tsv", "fits.tsv", "single_year.tsv",
                                    "manifest.json"};

class PipelineTest : public ::testing::Test
{
  protected:
    void SetUp() override
    {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / fmt_name(info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    static std::string fmt_name(const char* test) { return std::string("collabtime-test-") + test; }

    fs::path write_events(const std::string& name, std::uint64_t nodes_per_cohort = 800, std::uint64_t seed = 3)
    {
        CohortSchedule s;
        for (int y = 1950; y < 1956; ++y)
            s.cohorts.push_back({y, nodes_per_cohort, WeibullLaw{0.3, 5.0 + (y - 1950)}, 3.0, 0.3});
        auto path = dir_ / name;
        std::ofstream out(path);
        EventWriter writer(out, InputFormat::delimited);
        generate_dataset(s, seed, [&](const CollaborationEvent& e) { writer.write(e); });
        return path;
    }

    RunConfig config_for(const fs::path& input, const std::string& out)
    {
        RunConfig c;
        c.inputs = {input};
        c.out = dir_ / out;
        return c;
    }

    fs::path dir_;
};

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> data_rows(const fs::path& p)
{
    std::istringstream in(slurp(p));
    std::vector<std::string> rows;
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        if (n++ >= 2)
            rows.push_back(line);
    return rows;
}

int run_cli(const std::string& args, std::string* output = nullptr, const fs::path& log = {})
{
    std::string cmd = std::string("\"") + COLLABTIME_CLI_PATH + "\" " + args;
    if (!log.empty())
        cmd += " > \"" + log.string() + "\" 2>&1";
    int status = std::system(cmd.c_str());
    if (output && !log.empty())
        *output = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_F(PipelineTest, WritesAllOutputsWithVersionHeaders)
{
    auto config = config_for(write_events("ev.csv"), "out");
    auto result = run_analyze(config);
    for (const char* name : output_files)
        ASSERT_TRUE(fs::exists(config.out / name)) << name;
    for (const char* name : {"cohorts.tsv", "cohort_totals.tsv", "fits.tsv", "single_year.tsv"})
        EXPECT_EQ(slurp(config.out / name).rfind("# collabtime " + std::string(tool_version()), 0), 0u) << name;

    EXPECT_EQ(data_rows(config.out / "single_year.tsv").size(), result.node_tables.size());
    EXPECT_EQ(data_rows(config.out / "cohort_totals.tsv").size(),
              result.node_tables.size() + result.edge_tables.size());
    std::size_t fit_rows = 0;
    for (const auto* series : {&result.node_series, &result.edge_series})
        for (const auto& s : *series)
            fit_rows += s.points.size() + s.gaps.size();
    EXPECT_EQ(data_rows(config.out / "fits.tsv").size(), fit_rows);
    EXPECT_EQ(fit_rows, 3 * (result.node_tables.size() + result.edge_tables.size()));
    EXPECT_EQ(result.node_tables.size(), 6u);
}

TEST_F(PipelineTest, ManifestEchoesConfigAndCounters)
{
    auto config = config_for(write_events("ev.csv"), "out");
    config.tau_project = 1.5;
    auto result = run_analyze(config);
    auto manifest = nlohmann::json::parse(slurp(config.out / "manifest.json"));
    EXPECT_EQ(manifest["version"], tool_version());
    EXPECT_EQ(manifest["config"]["duration"]["tau_project"], 1.5);
    EXPECT_EQ(manifest["counters"]["parsed"], result.ingest.parsed);
    EXPECT_FALSE(manifest["config"].contains("threads"));
}

TEST_F(PipelineTest, ManifestReproducesRun)
{
    auto config = config_for(write_events("ev.csv"), "first");
    config.duration = DurationKind::gaussian;
    config.sigma = 0.4;
    config.seed = 12;
    config.edge_mode = EdgeLifetimeMode::per_collaboration;
    config.max_lifetime = 40;
    run_analyze(config);

    auto again = run_config_from_json(nlohmann::json::parse(slurp(config.out / "manifest.json")));
    again.out = dir_ / "second";
    run_analyze(again);
    for (const char* name : {"cohorts.tsv", "cohort_totals.tsv", "fits.tsv", "single_year.tsv"})
        EXPECT_EQ(slurp(config.out / name), slurp(again.out / name)) << name;
}

TEST_F(PipelineTest, ConfigJsonRoundTrip)
{
    RunConfig c;
    c.inputs = {"a.csv", "b.csv"};
    c.format = InputFormat::json_lines;
    c.schema.delimiter = '\t';
    c.duration = DurationKind::gaussian;
    c.tau_project = 3;
    c.sigma = 0.5;
    c.seed = 4;
    c.window = {1900, 1990};
    c.xmin = 2;
    c.variants = {FitVariant::weibull};
    auto back = run_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
}

TEST_F(PipelineTest, RerunAndThreadCountsAreBitIdentical)
{
    auto input = write_events("ev.csv", 1500);
    auto a = config_for(input, "a");
    auto b = config_for(input, "b");
    auto c = config_for(input, "c");
    b.threads = 4;
    c.threads = 3;
    c.memory_budget_mb = 0; // spill on every event
    c.export_edges = a.export_edges = b.export_edges = true;
    run_analyze(a);
    run_analyze(b);
    run_analyze(c);
    for (const char* name : {"cohorts.tsv", "cohort_totals.tsv", "fits.tsv", "single_year.tsv", "edge_intervals.tsv"})
    {
        EXPECT_EQ(slurp(a.out / name), slurp(b.out / name)) << name;
        EXPECT_EQ(slurp(a.out / name), slurp(c.out / name)) << name;
    }
}

TEST_F(PipelineTest, GaussianZeroSigmaEqualsFixed)
{
    auto input = write_events("ev.csv");
    auto fixed = config_for(input, "fixed");
    auto gauss = config_for(input, "gauss");
    gauss.duration = DurationKind::gaussian;
    gauss.sigma = 0.0;
    gauss.seed = 99;
    run_analyze(fixed);
    run_analyze(gauss);
    for (const char* name : {"cohorts.tsv", "cohort_totals.tsv", "fits.tsv", "single_year.tsv"})
        EXPECT_EQ(slurp(fixed.out / name), slurp(gauss.out / name)) << name;
}

TEST_F(PipelineTest, MissingInputNamesPath)
{
    auto config = config_for(dir_ / "absent.csv", "out");
    try
    {
        run_analyze(config);
        FAIL();
    }
    catch (const IngestError& e)
    {
        EXPECT_NE(std::string(e.what()).find("absent.csv"), std::string::npos);
    }
}

TEST_F(PipelineTest, DurationSpecParsing)
{
    EXPECT_EQ(parse_duration_spec("2"), (DurationSpec{DurationKind::fixed, 2.0, 0.0}));
    EXPECT_EQ(parse_duration_spec("fixed:0.25"), (DurationSpec{DurationKind::fixed, 0.25, 0.0}));
    EXPECT_EQ(parse_duration_spec("gaussian:2:0.5"), (DurationSpec{DurationKind::gaussian, 2.0, 0.5}));
    EXPECT_THROW(parse_duration_spec("gaussian:2:-1"), std::invalid_argument);
    EXPECT_THROW(parse_duration_spec("fixed:0"), std::invalid_argument);
    EXPECT_THROW(parse_duration_spec("uniform:1"), std::invalid_argument);
}

TEST_F(PipelineTest, SensitivityNeedsTwoPoints)
{
    auto config = config_for(write_events("ev.csv"), "sweep");
    std::vector<DurationSpec> one = {{DurationKind::fixed, 2.0, 0.0}};
    EXPECT_THROW(run_sensitivity(config, one, run_analyze), std::invalid_argument);
}

TEST_F(PipelineTest, SensitivityTabulatesK)
{
    auto config = config_for(write_events("ev.csv", 3000), "sweep");
    std::vector<DurationSpec> sweep = {
        {DurationKind::fixed, 1.0, 0.0}, {DurationKind::fixed, 2.0, 0.0}, {DurationKind::gaussian, 2.0, 0.0}};
    auto report = run_sensitivity(config, sweep, run_analyze);
    EXPECT_EQ(report.baseline, 1u);
    ASSERT_FALSE(report.rows.empty());
    for (const auto& row : report.rows)
    {
        ASSERT_EQ(row.k.size(), 3u);
        if (row.k[1] && row.k[2])
            EXPECT_EQ(*row.k[1], *row.k[2]); // gaussian with zero spread is the fixed model
    }
    EXPECT_TRUE(report.max_pairwise_dk(EntityKind::node).has_value());
    EXPECT_TRUE(fs::exists(config.out / "fixed-1" / "fits.tsv"));
    std::ostringstream out;
    write_sensitivity(out, report);
    EXPECT_NE(out.str().find("k[gaussian-2-0]"), std::string::npos);
}

TEST_F(PipelineTest, CliGenerateAnalyzeSensitivity)
{
    auto schedule = dir_ / "schedule.json";
    std::ofstream(schedule) << R"({"tau_project": 2, "year_max": 2020,
        "cohorts": [{"years": [1960, 1964], "new_nodes": 600,
                     "law": {"kind": "weibull", "k": 0.3, "lambda": [4, 6]}}]})";
    auto events = dir_ / "events.csv";
    std::string log;
    ASSERT_EQ(run_cli("generate --schedule \"" + schedule.string() + "\" --seed 5 --out \"" + events.string() + "\"",
                      &log, dir_ / "gen.log"),
              0)
        << log;
    auto gen_manifest = nlohmann::json::parse(slurp(events.string() + ".manifest.json"));
    EXPECT_EQ(gen_manifest["seed"], 5);

    std::ifstream in(events);
    IngestCounters counters;
    auto parsed = read_events(in, InputFormat::delimited, Schema{}, YearWindow{}, &counters);
    EXPECT_EQ(counters.malformed, 0u);
    EXPECT_EQ(counters.parsed, gen_manifest["counters"]["events"].get<std::uint64_t>());

    auto out = dir_ / "cli-out";
    ASSERT_EQ(run_cli("analyze --input \"" + events.string() + "\" --out \"" + out.string() +
                          "\" --threads 2 --variants weibull,powerlaw --window 1800:2020",
                      &log, dir_ / "analyze.log"),
              0)
        << log;
    for (const char* name : output_files)
        EXPECT_TRUE(fs::exists(out / name)) << name;

    // A config file with a flag override.
    auto config_path = dir_ / "config.json";
    std::ofstream(config_path) << nlohmann::json{{"inputs", {events.string()}}, {"max_lifetime", 30}}.dump();
    auto out2 = dir_ / "cli-out2";
    ASSERT_EQ(run_cli("analyze --config \"" + config_path.string() + "\" --out \"" + out2.string() + "\"", &log,
                      dir_ / "analyze2.log"),
              0)
        << log;
    auto m = nlohmann::json::parse(slurp(out2 / "manifest.json"));
    EXPECT_EQ(m["config"]["max_lifetime"], 30);

    auto sweep = dir_ / "sweep";
    ASSERT_EQ(run_cli("sensitivity --input \"" + events.string() + "\" --out \"" + sweep.string() +
                          "\" --tau-values 1,2 --gaussian 2:0.5",
                      &log, dir_ / "sweep.log"),
              0)
        << log;
    EXPECT_TRUE(fs::exists(sweep / "sensitivity.tsv"));
    EXPECT_TRUE(fs::exists(sweep / "gaussian-2-0.5" / "fits.tsv"));

    EXPECT_NE(run_cli("sensitivity --input \"" + events.string() + "\" --out \"" + sweep.string() +
                          "\" --tau-values 2",
                      &log, dir_ / "sweep1.log"),
              0);
}

TEST_F(PipelineTest, CliMissingInputFailsNamingPath)
{
    std::string log;
    auto missing = dir_ / "nowhere" / "events.csv";
    int rc = run_cli("analyze --input \"" + missing.string() + "\" --out \"" + (dir_ / "o").string() + "\"", &log,
                     dir_ / "missing.log");
    EXPECT_NE(rc, 0);
    EXPECT_NE(log.find(missing.string()), std::string::npos) << log;
}
