#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace collabtime
{

/// One collaborative project: a paper, a film, ...
struct CollaborationEvent
{
    std::string project_id;
    double completion_year = 0.0;
    std::vector<std::string> participants;

    friend bool operator==(const CollaborationEvent&, const CollaborationEvent&) = default;
};

enum class InputFormat
{
    delimited,
    json_lines,
};

InputFormat parse_input_format(std::string_view name);
std::string_view to_string(InputFormat format);

/// Column names (delimited header / JSON keys) plus delimiters.
struct Schema
{
    std::string project = "project";
    std::string year = "year";
    std::string members = "members";
    char delimiter = ',';
    char list_separator = ';';
};

/// Closed analysis window in calendar years.
struct YearWindow
{
    double min = 1800.0;
    double max = 2020.0;

    bool contains(double year) const { return year >= min && year <= max; }
};

/// Parses "1800:2020".
YearWindow parse_window(std::string_view text);

struct RowError
{
    std::uint64_t line = 0;
    std::string message;
};

struct IngestCounters
{
    std::uint64_t rows = 0;
    std::uint64_t parsed = 0;
    std::uint64_t malformed = 0;
    std::uint64_t skipped_window = 0;
    std::uint64_t duplicates_removed = 0;
};

class IngestError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Pull-style reader over a delimited or JSON-lines event source.
///
/// Rows are yielded in file order. Malformed rows produce a RowError (with
/// the 1-based physical line number) and are counted; rows whose year lies
/// outside the window are counted as skipped. After the stream is drained,
/// rows == parsed + malformed + skipped_window.
class EventReader
{
  public:
    static constexpr std::size_t max_recorded_errors = 1000;

    EventReader(std::istream& in, InputFormat format, Schema schema, YearWindow window);

    /// Fills `event` with the next valid row. Returns false at end of input.
    /// `event` is reused across calls so its buffers keep their capacity.
    bool next(CollaborationEvent& event);

    const IngestCounters& counters() const { return counters_; }

    /// First `max_recorded_errors` malformed-row records; counters().malformed
    /// holds the full count.
    const std::vector<RowError>& errors() const { return errors_; }

  private:
    bool read_header();
    bool parse_delimited(std::string_view line, CollaborationEvent& event, std::string& error);
    bool parse_json(std::string_view line, CollaborationEvent& event, std::string& error);
    void dedup(CollaborationEvent& event);
    void record_error(std::string message);

    std::istream& in_;
    InputFormat format_;
    Schema schema_;
    YearWindow window_;
    std::string line_;
    std::uint64_t line_number_ = 0;
    bool header_done_ = false;
    std::size_t project_col_ = 0;
    std::size_t year_col_ = 0;
    std::size_t members_col_ = 0;
    std::size_t required_cols_ = 0;
    std::vector<std::string_view> fields_;
    IngestCounters counters_;
    std::vector<RowError> errors_;
};

/// Opens a file for EventReader; throws IngestError naming the path when the
/// file cannot be read.
std::unique_ptr<std::ifstream> open_event_source(const std::filesystem::path& path);

/// Convenience: drain a stream into a vector.
std::vector<CollaborationEvent> read_events(std::istream& in, InputFormat format,
                                            const Schema& schema, const YearWindow& window,
                                            IngestCounters* counters = nullptr,
                                            std::vector<RowError>* errors = nullptr);

/// Writes events in a format EventReader reads back unchanged.
class EventWriter
{
  public:
    EventWriter(std::ostream& out, InputFormat format, Schema schema = {});

    void write(const CollaborationEvent& event);

  private:
    std::ostream& out_;
    InputFormat format_;
    Schema schema_;
    std::string buffer_;
};

//---------------------------------------------------------------------------//
// Collaboration duration models
//---------------------------------------------------------------------------//

enum class DurationKind
{
    fixed,
    gaussian,
};

DurationKind parse_duration_kind(std::string_view name);
std::string_view to_string(DurationKind kind);

/// Project duration tau_project assigned to each event. The node entry time
/// and every edge creation time are `completion - duration`.
class DurationModel
{
  public:
    /// Gaussian draws below this are clamped up to it.
    static constexpr double min_duration = 0.05;

    static DurationModel fixed(double tau_project);
    static DurationModel gaussian(double tau_project, double sigma, std::uint64_t seed);

    DurationKind kind() const { return kind_; }
    double tau_project() const { return tau_; }
    double sigma() const { return sigma_; }
    std::uint64_t seed() const { return seed_; }

    /// Deterministic in (seed, project_id); independent of call order.
    double duration_for(std::string_view project_id) const;

  private:
    DurationModel(DurationKind kind, double tau, double sigma, std::uint64_t seed);

    DurationKind kind_;
    double tau_;
    double sigma_;
    std::uint64_t seed_;
};

double assign_duration(const CollaborationEvent& event, const DurationModel& model);

}  // namespace collabtime
