#include "collabtime/tempgraph.hpp"

#include "collabtime/hash.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <unistd.h>

namespace collabtime
{

namespace
{

// Spill file layout: 8-byte magic, uint32 version, uint32 record size, then
// raw Record structs in host byte order.
constexpr char spill_magic[8] = {'C', 'T', 'E', 'D', 'G', 'E', 'S', 'P'};
constexpr std::uint32_t spill_version = 1;

std::uint32_t key_first(std::uint64_t key) { return static_cast<std::uint32_t>(key >> 32); }
std::uint32_t key_second(std::uint64_t key) { return static_cast<std::uint32_t>(key); }

}  // namespace

PairKey canonical_pair(std::string a, std::string b)
{
    if (b < a)
        std::swap(a, b);
    return {std::move(a), std::move(b)};
}

std::vector<EdgeInstance> expand_event(const CollaborationEvent& event, double duration)
{
    const auto& p = event.participants;
    std::vector<EdgeInstance> out;
    if (p.size() < 2)
        return out;
    out.reserve(p.size() * (p.size() - 1) / 2);
    Interval interval{event.completion_year - duration, event.completion_year};
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            out.push_back({canonical_pair(p[i], p[j]), interval});
    return out;
}

void merge_intervals(std::vector<Interval>& intervals)
{
    if (intervals.empty())
        return;
    std::sort(intervals.begin(), intervals.end());
    std::size_t out = 0;
    for (std::size_t i = 1; i < intervals.size(); ++i)
    {
        if (intervals[i].creation <= intervals[out].removal)
            intervals[out].removal = std::max(intervals[out].removal, intervals[i].removal);
        else
            intervals[++out] = intervals[i];
    }
    intervals.resize(out + 1);
}

bool is_active(std::span<const Interval> intervals, double t)
{
    // Intervals are sorted and disjoint: find the last one starting at or before t.
    auto it = std::upper_bound(intervals.begin(), intervals.end(), t,
                               [](double v, const Interval& iv) { return v < iv.creation; });
    return it != intervals.begin() && std::prev(it)->contains(t);
}

bool is_active(const TemporalEdge& edge, double t) { return is_active(edge.intervals, t); }

std::map<PairKey, TemporalEdge> merge_instances(std::span<const EdgeInstance> instances)
{
    std::map<PairKey, TemporalEdge> edges;
    for (const auto& inst : instances)
    {
        auto& edge = edges[inst.pair];
        edge.pair = inst.pair;
        edge.intervals.push_back(inst.interval);
        ++edge.collaboration_count;
    }
    for (auto& [_, edge] : edges)
        merge_intervals(edge.intervals);
    return edges;
}

//---------------------------------------------------------------------------//

TemporalGraphBuilder::TemporalGraphBuilder(AccumulatorOptions options)
    : options_(std::move(options))
{
    if (options_.partitions == 0)
        throw std::invalid_argument("accumulator needs at least one partition");
    if (options_.threads == 0)
        options_.threads = 1;
    partitions_.resize(options_.partitions);
    spilled_.assign(options_.partitions, false);
}

TemporalGraphBuilder::~TemporalGraphBuilder()
{
    std::error_code ec;
    for (std::size_t p = 0; p < spilled_.size(); ++p)
        if (spilled_[p])
            std::filesystem::remove(spill_path(p), ec);
    if (owns_spill_dir_)
        std::filesystem::remove(spill_dir_, ec);
}

std::uint32_t TemporalGraphBuilder::intern(const std::string& name)
{
    auto [it, inserted] = ids_.try_emplace(name, static_cast<std::uint32_t>(names_.size()));
    if (inserted)
    {
        if (names_.size() == std::numeric_limits<std::uint32_t>::max())
            throw std::length_error("participant count exceeds 32-bit id space");
        names_.push_back(name);
        nodes_.push_back({0.0, 0.0, 0});
    }
    return it->second;
}

void TemporalGraphBuilder::add_event(const CollaborationEvent& event, double duration)
{
    ++stats_.events;
    const double creation = event.completion_year - duration;
    const double removal = event.completion_year;

    scratch_.clear();
    for (const auto& name : event.participants)
    {
        auto id = intern(name);
        auto& node = nodes_[id];
        if (node.event_count == 0)
        {
            node.first_entry = creation;
            node.last_activity = removal;
        }
        else
        {
            node.first_entry = std::min(node.first_entry, creation);
            node.last_activity = std::max(node.last_activity, removal);
        }
        ++node.event_count;
        scratch_.push_back(id);
    }
    if (scratch_.size() < 2)
        return;

    // Canonical order is lexicographic on identifiers, not on intern ids.
    std::sort(scratch_.begin(), scratch_.end(),
              [&](std::uint32_t a, std::uint32_t b) { return names_[a] < names_[b]; });
    const auto nparts = partitions_.size();
    for (std::size_t i = 0; i < scratch_.size(); ++i)
    {
        for (std::size_t j = i + 1; j < scratch_.size(); ++j)
        {
            std::uint64_t key = (std::uint64_t{scratch_[i]} << 32) | scratch_[j];
            partitions_[splitmix64(key) % nparts].push_back({key, creation, removal});
        }
    }
    auto added = scratch_.size() * (scratch_.size() - 1) / 2;
    stats_.edge_instances += added;
    buffered_ += added * sizeof(Record);
    if (buffered_ > options_.memory_budget_bytes)
        spill();
}

std::filesystem::path TemporalGraphBuilder::spill_path(std::size_t p) const
{
    return spill_dir_ / fmt::format("edges-{:04d}.bin", p);
}

void TemporalGraphBuilder::spill()
{
    if (spill_dir_.empty())
    {
        if (!options_.spill_dir.empty())
        {
            spill_dir_ = options_.spill_dir;
            std::filesystem::create_directories(spill_dir_);
        }
        else
        {
            spill_dir_ = std::filesystem::temp_directory_path()
                         / fmt::format("collabtime-spill-{}-{:x}", ::getpid(),
                                       reinterpret_cast<std::uintptr_t>(this));
            std::filesystem::create_directories(spill_dir_);
            owns_spill_dir_ = true;
        }
    }
    for (std::size_t p = 0; p < partitions_.size(); ++p)
    {
        auto& buf = partitions_[p];
        if (buf.empty())
            continue;
        std::ofstream out(spill_path(p), std::ios::binary | std::ios::app);
        if (!out)
            throw std::runtime_error(fmt::format("cannot write spill file {}", spill_path(p).string()));
        if (!spilled_[p])
        {
            std::uint32_t header[2] = {spill_version, sizeof(Record)};
            out.write(spill_magic, sizeof spill_magic);
            out.write(reinterpret_cast<const char*>(header), sizeof header);
            spilled_[p] = true;
        }
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(Record)));
        if (!out)
            throw std::runtime_error(fmt::format("short write on spill file {}", spill_path(p).string()));
        stats_.spilled_instances += buf.size();
        std::vector<Record>().swap(buf);
    }
    buffered_ = 0;
    ++stats_.spill_flushes;
}

std::vector<TemporalGraphBuilder::Record> TemporalGraphBuilder::load_partition(std::size_t p)
{
    std::vector<Record> records;
    if (spilled_[p])
    {
        auto path = spill_path(p);
        std::ifstream in(path, std::ios::binary);
        char magic[8];
        std::uint32_t header[2];
        in.read(magic, sizeof magic);
        in.read(reinterpret_cast<char*>(header), sizeof header);
        if (!in || std::memcmp(magic, spill_magic, sizeof magic) != 0 || header[0] != spill_version
            || header[1] != sizeof(Record))
        {
            throw std::runtime_error(fmt::format("spill file {} has an unknown format", path.string()));
        }
        auto bytes = std::filesystem::file_size(path) - sizeof magic - sizeof header;
        records.resize(bytes / sizeof(Record));
        in.read(reinterpret_cast<char*>(records.data()), static_cast<std::streamsize>(bytes));
        if (!in)
            throw std::runtime_error(fmt::format("short read on spill file {}", path.string()));
        std::error_code ec;
        std::filesystem::remove(path, ec);
        spilled_[p] = false;
    }
    auto& buf = partitions_[p];
    records.insert(records.end(), buf.begin(), buf.end());
    std::vector<Record>().swap(buf);
    return records;
}

void TemporalGraphBuilder::for_each_node(const std::function<void(const NodeActivity&)>& visit) const
{
    NodeActivity activity;
    for (std::size_t id = 0; id < nodes_.size(); ++id)
    {
        activity.participant_id = names_[id];
        activity.first_entry = nodes_[id].first_entry;
        activity.last_activity = nodes_[id].last_activity;
        activity.event_count = nodes_[id].event_count;
        visit(activity);
    }
}

void TemporalGraphBuilder::finish_edges(
    const std::function<void(std::size_t partition, const EdgeView&)>& visit)
{
    stats_.participants = names_.size();

    auto process = [&](std::size_t p) {
        auto records = load_partition(p);
        std::sort(records.begin(), records.end(), [](const Record& a, const Record& b) {
            if (a.key != b.key)
                return a.key < b.key;
            if (a.creation != b.creation)
                return a.creation < b.creation;
            return a.removal < b.removal;
        });
        std::vector<Interval> intervals;
        std::size_t i = 0;
        while (i < records.size())
        {
            auto key = records[i].key;
            intervals.clear();
            std::size_t j = i;
            for (; j < records.size() && records[j].key == key; ++j)
                intervals.push_back({records[j].creation, records[j].removal});
            merge_intervals(intervals);
            visit(p, EdgeView{key_first(key), key_second(key), intervals, j - i});
            i = j;
        }
    };

    const auto nparts = partitions_.size();
    const unsigned workers = std::min<std::size_t>(options_.threads, nparts);
    if (workers <= 1)
    {
        for (std::size_t p = 0; p < nparts; ++p)
            process(p);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
    {
        pool.emplace_back([&, w] {
            try
            {
                for (auto p = next++; p < nparts; p = next++)
                    process(p);
            }
            catch (...)
            {
                failures[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& f : failures)
        if (f)
            std::rethrow_exception(f);
}

//---------------------------------------------------------------------------//

TemporalGraph accumulate(std::span<const CollaborationEvent> events, const DurationModel& model,
                         AccumulatorOptions options)
{
    TemporalGraphBuilder builder(std::move(options));
    for (const auto& event : events)
        builder.add_event(event, assign_duration(event, model));

    TemporalGraph graph;
    builder.for_each_node([&](const NodeActivity& node) { graph.nodes.emplace(node.participant_id, node); });

    std::vector<std::vector<TemporalEdge>> per_partition(builder.partition_count());
    builder.finish_edges([&](std::size_t p, const EdgeView& view) {
        per_partition[p].push_back(
            {{builder.participant_name(view.first), builder.participant_name(view.second)},
             {view.intervals.begin(), view.intervals.end()},
             view.collaboration_count});
    });
    for (auto& edges : per_partition)
        for (auto& edge : edges)
            graph.edges.emplace(edge.pair, std::move(edge));
    return graph;
}

void write_edge_intervals(std::ostream& out, const std::map<PairKey, TemporalEdge>& edges)
{
    out << "first\tsecond\tcreation\tremoval\n";
    for (const auto& [pair, edge] : edges)
        for (const auto& iv : edge.intervals)
            out << fmt::format("{}\t{}\t{}\t{}\n", pair.first, pair.second, iv.creation, iv.removal);
}

}  // namespace collabtime
