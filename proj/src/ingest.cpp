#include "collabtime/ingest.hpp"

#include "collabtime/hash.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <unordered_set>

#include <fmt/format.h>

namespace collabtime
{

namespace
{

std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n";
    auto begin = s.find_first_not_of(ws);
    if (begin == std::string_view::npos)
        return {};
    auto end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

void split(std::string_view s, char sep, std::vector<std::string_view>& out)
{
    out.clear();
    std::size_t start = 0;
    while (true)
    {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos)
        {
            out.push_back(s.substr(start));
            return;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

bool parse_year(std::string_view text, double& year)
{
    text = trim(text);
    if (text.empty())
        return false;
    if (text.front() == '+')
        text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), year);
    return ec == std::errc{} && ptr == text.data() + text.size() && std::isfinite(year);
}

}  // namespace

InputFormat parse_input_format(std::string_view name)
{
    if (name == "delimited" || name == "csv" || name == "tsv")
        return InputFormat::delimited;
    if (name == "json_lines" || name == "jsonl" || name == "json-lines")
        return InputFormat::json_lines;
    throw std::invalid_argument(fmt::format("unknown input format '{}'", name));
}

std::string_view to_string(InputFormat format)
{
    return format == InputFormat::delimited ? "delimited" : "json_lines";
}

YearWindow parse_window(std::string_view text)
{
    auto colon = text.find(':');
    YearWindow window;
    if (colon == std::string_view::npos || !parse_year(text.substr(0, colon), window.min)
        || !parse_year(text.substr(colon + 1), window.max))
    {
        throw std::invalid_argument(fmt::format("window must look like 1800:2020, got '{}'", text));
    }
    if (window.min > window.max)
        throw std::invalid_argument(fmt::format("window start exceeds end in '{}'", text));
    return window;
}

//---------------------------------------------------------------------------//

EventReader::EventReader(std::istream& in, InputFormat format, Schema schema, YearWindow window)
    : in_(in), format_(format), schema_(std::move(schema)), window_(window)
{
    if (format_ == InputFormat::json_lines)
        header_done_ = true;
}

bool EventReader::read_header()
{
    while (std::getline(in_, line_))
    {
        ++line_number_;
        auto view = trim(line_);
        if (view.empty())
            continue;
        split(view, schema_.delimiter, fields_);
        auto find = [&](const std::string& name) {
            auto it = std::find_if(fields_.begin(), fields_.end(),
                                   [&](std::string_view f) { return trim(f) == name; });
            if (it == fields_.end())
                throw IngestError(fmt::format("header row lacks column '{}'", name));
            return static_cast<std::size_t>(it - fields_.begin());
        };
        project_col_ = find(schema_.project);
        year_col_ = find(schema_.year);
        members_col_ = find(schema_.members);
        required_cols_ = std::max({project_col_, year_col_, members_col_}) + 1;
        header_done_ = true;
        return true;
    }
    return false;
}

void EventReader::record_error(std::string message)
{
    ++counters_.malformed;
    if (errors_.size() < max_recorded_errors)
        errors_.push_back({line_number_, std::move(message)});
}

bool EventReader::parse_delimited(std::string_view line, CollaborationEvent& event,
                                  std::string& error)
{
    split(line, schema_.delimiter, fields_);
    if (fields_.size() < required_cols_)
    {
        error = fmt::format("expected at least {} fields, found {}", required_cols_, fields_.size());
        return false;
    }
    auto project = trim(fields_[project_col_]);
    if (project.empty())
    {
        error = "empty project identifier";
        return false;
    }
    if (!parse_year(fields_[year_col_], event.completion_year))
    {
        error = fmt::format("unparsable year '{}'", trim(fields_[year_col_]));
        return false;
    }
    event.project_id.assign(project);

    auto members = fields_[members_col_];
    std::size_t count = 0;
    std::size_t start = 0;
    while (start <= members.size())
    {
        auto pos = members.find(schema_.list_separator, start);
        if (pos == std::string_view::npos)
            pos = members.size();
        auto token = trim(members.substr(start, pos - start));
        if (!token.empty())
        {
            if (count == event.participants.size())
                event.participants.emplace_back();
            event.participants[count++].assign(token);
        }
        start = pos + 1;
    }
    event.participants.resize(count);
    if (count == 0)
    {
        error = "empty participant list";
        return false;
    }
    return true;
}

bool EventReader::parse_json(std::string_view line, CollaborationEvent& event, std::string& error)
{
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
    {
        error = "not a JSON object";
        return false;
    }
    auto scalar_text = [](const nlohmann::json& v, std::string& out) {
        if (v.is_string())
            out = v.get<std::string>();
        else if (v.is_number_integer())
            out = std::to_string(v.get<long long>());
        else if (v.is_number_unsigned())
            out = std::to_string(v.get<unsigned long long>());
        else
            return false;
        return !out.empty();
    };

    auto project = doc.find(schema_.project);
    auto year = doc.find(schema_.year);
    auto members = doc.find(schema_.members);
    if (project == doc.end() || year == doc.end() || members == doc.end())
    {
        error = fmt::format("missing one of keys '{}', '{}', '{}'", schema_.project, schema_.year,
                            schema_.members);
        return false;
    }
    if (!scalar_text(*project, event.project_id))
    {
        error = "project must be a non-empty string or integer";
        return false;
    }
    if (year->is_number())
    {
        event.completion_year = year->get<double>();
    }
    else if (!year->is_string() || !parse_year(year->get<std::string>(), event.completion_year))
    {
        error = "unparsable year";
        return false;
    }
    if (!members->is_array())
    {
        error = "members must be an array";
        return false;
    }
    event.participants.clear();
    std::string id;
    for (const auto& m : *members)
    {
        if (!scalar_text(m, id))
        {
            error = "member identifiers must be non-empty strings or integers";
            return false;
        }
        event.participants.push_back(id);
    }
    if (event.participants.empty())
    {
        error = "empty participant list";
        return false;
    }
    return true;
}

void EventReader::dedup(CollaborationEvent& event)
{
    auto& p = event.participants;
    if (p.size() < 2)
        return;
    // Teams are small; quadratic scan beats hashing up to a few dozen members.
    std::size_t kept = 0;
    if (p.size() <= 32)
    {
        for (std::size_t i = 0; i < p.size(); ++i)
        {
            bool seen = false;
            for (std::size_t j = 0; j < kept && !seen; ++j)
                seen = p[j] == p[i];
            if (!seen)
            {
                if (kept != i)
                    std::swap(p[kept], p[i]);
                ++kept;
            }
        }
    }
    else
    {
        std::unordered_set<std::string> seen;
        for (std::size_t i = 0; i < p.size(); ++i)
        {
            if (seen.insert(p[i]).second)
            {
                if (kept != i)
                    std::swap(p[kept], p[i]);
                ++kept;
            }
        }
    }
    counters_.duplicates_removed += p.size() - kept;
    p.resize(kept);
}

bool EventReader::next(CollaborationEvent& event)
{
    if (!header_done_ && !read_header())
        return false;

    std::string error;
    while (std::getline(in_, line_))
    {
        ++line_number_;
        auto view = trim(line_);
        if (view.empty())
            continue;
        ++counters_.rows;
        bool ok = format_ == InputFormat::delimited ? parse_delimited(view, event, error)
                                                    : parse_json(view, event, error);
        if (!ok)
        {
            record_error(std::move(error));
            error.clear();
            continue;
        }
        if (!window_.contains(event.completion_year))
        {
            ++counters_.skipped_window;
            continue;
        }
        dedup(event);
        ++counters_.parsed;
        return true;
    }
    if (in_.bad())
        throw IngestError("read failure on event source");
    return false;
}

std::unique_ptr<std::ifstream> open_event_source(const std::filesystem::path& path)
{
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec))
        throw IngestError(fmt::format("cannot read input '{}': not a readable file", path.string()));
    auto in = std::make_unique<std::ifstream>(path, std::ios::binary);
    if (!*in)
        throw IngestError(fmt::format("cannot open input '{}'", path.string()));
    return in;
}

std::vector<CollaborationEvent> read_events(std::istream& in, InputFormat format,
                                            const Schema& schema, const YearWindow& window,
                                            IngestCounters* counters, std::vector<RowError>* errors)
{
    EventReader reader(in, format, schema, window);
    std::vector<CollaborationEvent> events;
    CollaborationEvent event;
    while (reader.next(event))
        events.push_back(event);
    if (counters)
        *counters = reader.counters();
    if (errors)
        *errors = reader.errors();
    return events;
}

//---------------------------------------------------------------------------//

EventWriter::EventWriter(std::ostream& out, InputFormat format, Schema schema)
    : out_(out), format_(format), schema_(std::move(schema))
{
    if (format_ == InputFormat::delimited)
    {
        out_ << schema_.project << schema_.delimiter << schema_.year << schema_.delimiter
             << schema_.members << '\n';
    }
}

void EventWriter::write(const CollaborationEvent& event)
{
    if (format_ == InputFormat::json_lines)
    {
        nlohmann::json doc = {{schema_.project, event.project_id},
                              {schema_.year, event.completion_year},
                              {schema_.members, event.participants}};
        out_ << doc.dump() << '\n';
        return;
    }
    buffer_.clear();
    fmt::format_to(std::back_inserter(buffer_), "{}{}{}{}", event.project_id, schema_.delimiter,
                   event.completion_year, schema_.delimiter);
    for (std::size_t i = 0; i < event.participants.size(); ++i)
    {
        if (i)
            buffer_.push_back(schema_.list_separator);
        buffer_ += event.participants[i];
    }
    buffer_.push_back('\n');
    out_.write(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
}

//---------------------------------------------------------------------------//

DurationKind parse_duration_kind(std::string_view name)
{
    if (name == "fixed")
        return DurationKind::fixed;
    if (name == "gaussian")
        return DurationKind::gaussian;
    throw std::invalid_argument(fmt::format("unknown duration model '{}'", name));
}

std::string_view to_string(DurationKind kind)
{
    return kind == DurationKind::fixed ? "fixed" : "gaussian";
}

DurationModel::DurationModel(DurationKind kind, double tau, double sigma, std::uint64_t seed)
    : kind_(kind), tau_(tau), sigma_(sigma), seed_(seed)
{
    if (!(tau_ > 0.0) || !std::isfinite(tau_))
        throw std::invalid_argument(fmt::format("tau_project must be positive, got {}", tau_));
    if (!(sigma_ >= 0.0) || !std::isfinite(sigma_))
        throw std::invalid_argument(fmt::format("sigma must be nonnegative, got {}", sigma_));
}

DurationModel DurationModel::fixed(double tau_project)
{
    return DurationModel(DurationKind::fixed, tau_project, 0.0, 0);
}

DurationModel DurationModel::gaussian(double tau_project, double sigma, std::uint64_t seed)
{
    return DurationModel(DurationKind::gaussian, tau_project, sigma, seed);
}

double DurationModel::duration_for(std::string_view project_id) const
{
    if (kind_ == DurationKind::fixed || sigma_ == 0.0)
        return tau_;
    // Box-Muller on two uniforms derived from hash(seed, project_id).
    auto h = fnv1a(project_id, splitmix64(seed_));
    double u1 = open_unit(splitmix64(h));
    double u2 = open_unit(splitmix64(h ^ 0x5851f42d4c957f2dULL));
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return std::max(tau_ + sigma_ * z, min_duration);
}

double assign_duration(const CollaborationEvent& event, const DurationModel& model)
{
    return model.duration_for(event.project_id);
}

}  // namespace collabtime
