#pragma once

#include "collabtime/ingest.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace collabtime
{

/// Active period of an edge, half-open: [creation, removal).
struct Interval
{
    double creation = 0.0;
    double removal = 0.0;

    bool contains(double t) const { return t >= creation && t < removal; }

    friend auto operator<=>(const Interval&, const Interval&) = default;
};

struct NodeActivity
{
    std::string participant_id;
    double first_entry = 0.0;   ///< earliest (completion - duration)
    double last_activity = 0.0; ///< latest completion
    std::uint64_t event_count = 0;

    friend bool operator==(const NodeActivity&, const NodeActivity&) = default;
};

/// Unordered participant pair stored with first < second (lexicographic).
using PairKey = std::pair<std::string, std::string>;

PairKey canonical_pair(std::string a, std::string b);

struct TemporalEdge
{
    PairKey pair;
    std::vector<Interval> intervals; ///< sorted, pairwise disjoint
    std::uint64_t collaboration_count = 0;

    friend bool operator==(const TemporalEdge&, const TemporalEdge&) = default;
};

struct EdgeInstance
{
    PairKey pair;
    Interval interval;

    friend bool operator==(const EdgeInstance&, const EdgeInstance&) = default;
};

/// Clique expansion: n(n-1)/2 instances over [completion - duration, completion).
std::vector<EdgeInstance> expand_event(const CollaborationEvent& event, double duration);

/// Sorts and coalesces overlapping or touching intervals in place.
void merge_intervals(std::vector<Interval>& intervals);

bool is_active(const TemporalEdge& edge, double t);
bool is_active(std::span<const Interval> intervals, double t);

struct TemporalGraph
{
    std::map<std::string, NodeActivity> nodes;
    std::map<PairKey, TemporalEdge> edges;

    friend bool operator==(const TemporalGraph&, const TemporalGraph&) = default;
};

/// Merges a bag of edge instances per pair. Result is independent of input order.
std::map<PairKey, TemporalEdge> merge_instances(std::span<const EdgeInstance> instances);

struct AccumulatorOptions
{
    std::size_t partitions = 64;
    /// Buffered edge-instance bytes that trigger a spill to disk.
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
    /// Spill location; empty selects a fresh directory under temp_directory_path().
    std::filesystem::path spill_dir;
    unsigned threads = 1;
};

struct AccumulatorStats
{
    std::uint64_t events = 0;
    std::uint64_t edge_instances = 0;
    std::uint64_t participants = 0;
    std::uint64_t spill_flushes = 0;
    std::uint64_t spilled_instances = 0;
};

/// Edge as seen by finish(): participant ids index participant_name().
struct EdgeView
{
    std::uint32_t first = 0;
    std::uint32_t second = 0;
    std::span<const Interval> intervals;
    std::uint64_t collaboration_count = 0;
};

/// Streaming node/edge accumulation.
///
/// Participants are interned to 32-bit ids. Edge instances are hash-partitioned
/// by pair; once buffered instances exceed the memory budget every partition
/// buffer is appended to its spill file. finish() then sorts and merges one
/// partition at a time, so peak memory is bounded by the largest partition
/// rather than the whole instance stream.
class TemporalGraphBuilder
{
  public:
    explicit TemporalGraphBuilder(AccumulatorOptions options = {});
    ~TemporalGraphBuilder();

    TemporalGraphBuilder(const TemporalGraphBuilder&) = delete;
    TemporalGraphBuilder& operator=(const TemporalGraphBuilder&) = delete;

    void add_event(const CollaborationEvent& event, double duration);

    std::size_t partition_count() const { return partitions_.size(); }
    const std::string& participant_name(std::uint32_t id) const { return names_[id]; }
    const AccumulatorStats& stats() const { return stats_; }

    /// Visits every participant in first-seen order.
    void for_each_node(const std::function<void(const NodeActivity&)>& visit) const;

    /// Merges each partition and visits its edges in canonical-key order.
    /// Partitions run on up to options.threads workers; all edges of one
    /// partition are visited by the same worker, so per-partition state in the
    /// callback needs no locking. Consumes the buffered instances.
    void finish_edges(const std::function<void(std::size_t partition, const EdgeView&)>& visit);

  private:
    struct NodeState
    {
        double first_entry;
        double last_activity;
        std::uint64_t event_count;
    };

    struct Record
    {
        std::uint64_t key; ///< (first id << 32) | second id
        double creation;
        double removal;
    };

    std::uint32_t intern(const std::string& name);
    void spill();
    std::vector<Record> load_partition(std::size_t p);
    std::filesystem::path spill_path(std::size_t p) const;

    AccumulatorOptions options_;
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::string> names_;
    std::vector<NodeState> nodes_;
    std::vector<std::vector<Record>> partitions_;
    std::vector<bool> spilled_;
    std::size_t buffered_ = 0;
    std::filesystem::path spill_dir_;
    bool owns_spill_dir_ = false;
    std::vector<std::uint32_t> scratch_;
    AccumulatorStats stats_;
};

/// In-memory accumulation of a finite event set.
TemporalGraph accumulate(std::span<const CollaborationEvent> events, const DurationModel& model,
                         AccumulatorOptions options = {});

/// Debug export: one row per interval (first, second, creation, removal).
void write_edge_intervals(std::ostream& out, const std::map<PairKey, TemporalEdge>& edges);

}  // namespace collabtime
