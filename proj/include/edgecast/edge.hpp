#ifndef EDGECAST_EDGE_HPP
#define EDGECAST_EDGE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <vector>

#include "edgecast/metrics.hpp"
#include "edgecast/qoc.hpp"
#include "edgecast/ts.hpp"

namespace edgecast::edge {

using StreamId = std::uint16_t;
using EgressId = std::uint16_t;
using IngressPort = std::uint16_t;

struct InvalidDelta : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EgressPolicy {
    EgressId egress_id;
    double delta;  // differential-drop fraction in [0,1]
};

struct PolicyEntry {
    std::vector<EgressPolicy> egresses;
    std::set<std::uint16_t> video_pids;
};

/// One immutable policy snapshot. The data path holds a snapshot for the
/// whole datagram it is processing; updates swap in a new snapshot at
/// version+1 (single writer, many readers).
struct PolicyMap {
    std::uint64_t version = 0;
    std::map<std::pair<IngressPort, StreamId>, PolicyEntry> entries;

    const PolicyEntry* find(IngressPort ingress, StreamId stream) const {
        auto it = entries.find({ingress, stream});
        return it == entries.end() ? nullptr : &it->second;
    }
};

using PolicySnapshot = std::shared_ptr<const PolicyMap>;

/// Produce a new map at version+1 with one stream's egress list replaced.
/// Throws InvalidDelta when any delta is outside [0,1].
PolicySnapshot apply_policy_update(const PolicySnapshot& map, IngressPort ingress,
                                   StreamId stream, PolicyEntry entry);

/// Per-(stream, egress) error-diffusion state and counters.
struct SuppressionState {
    double accumulator = 0.0;  // in [0,1)
    std::uint64_t dropped = 0;
    std::uint64_t forwarded = 0;
};

enum class Action : std::uint8_t { Forward, Suppress };

struct EgressDecision {
    ts::FrameClass frame_class;
    std::vector<std::pair<EgressId, Action>> actions;
};

/// Decide per-egress forwarding for one classified packet. Reference,
/// NonVideo and Unknown always forward; Differential goes through the
/// per-egress error-diffusion accumulator.
EgressDecision decide(ts::FrameClass cls, const PolicyEntry& entry,
                      std::map<EgressId, SuppressionState>& state);

/// Compute the EdgeControl outputs: interface lists (the policy map entry
/// per stream), per-stream effective quality for sensor notification, and
/// the residual suppression matrix.
struct EdgeControlResult {
    PolicySnapshot map;
    std::vector<qoc::StreamQuality> q_eff;  // per stream index
    qoc::SuppressionMatrix delta;
};

struct StreamDesc {
    IngressPort ingress;
    StreamId id;
    std::set<std::uint16_t> video_pids;
};

/// thresholds is keyed by (stream index, process index); egress_of_process
/// maps a process index to its egress id. Streams no process uses are left
/// out of the map entirely.
EdgeControlResult edge_control(
    const PolicySnapshot& current, std::span<const StreamDesc> streams,
    std::span<const EgressId> egress_of_process,
    const std::map<std::pair<std::size_t, std::size_t>, qoc::QocRequirement>& thresholds,
    const qoc::DetectionTable& table);

/// Sink for forwarded bytes. Returns false on backpressure; the unit is
/// then counted as overflow-dropped for that egress only.
using EmitFn = std::function<bool(EgressId, std::span<const std::uint8_t>)>;

/// The edge data plane for one ingress path: classify arriving TS units and
/// clone-and-forward them per the policy snapshot, batching up to 7 units
/// per egress datagram.
class EdgePipeline {
public:
    EdgePipeline(PolicySnapshot map, EmitFn emit, std::size_t batch_units = 7);

    /// Process one ingress datagram (k x 188 bytes). Throws BadFraming /
    /// SyncLoss from the scanner.
    void ingest_datagram(IngressPort ingress, StreamId stream,
                         std::span<const std::uint8_t> payload);

    /// Flush partially filled egress batches (batch timer analog).
    void flush();

    /// Swap in a new policy snapshot; takes effect at the next datagram.
    void set_policy(PolicySnapshot map);
    PolicySnapshot policy() const { return map_; }

    const metrics::PathCounters& counters(StreamId stream, EgressId egress) const;
    const std::map<std::pair<StreamId, EgressId>, metrics::PathCounters>& counters()
        const { return counters_; }
    const std::map<StreamId, std::map<EgressId, SuppressionState>>& suppression()
        const { return suppression_; }

    std::uint64_t packets_parsed() const { return packets_parsed_; }
    std::uint64_t decisions_made() const { return decisions_made_; }
    std::uint64_t packets_cloned() const { return packets_cloned_; }
    std::uint64_t orphaned() const { return orphaned_; }

private:
    void emit_unit(StreamId stream, EgressId egress,
                   const ts::TsPacket& pkt, ts::FrameClass cls);

    PolicySnapshot map_;
    EmitFn emit_;
    std::size_t batch_units_;
    std::map<std::pair<StreamId, std::uint16_t>, ts::PidState> pid_states_;
    std::map<StreamId, std::map<EgressId, SuppressionState>> suppression_;
    std::map<std::pair<StreamId, EgressId>, metrics::PathCounters> counters_;
    struct Batch {
        std::vector<std::uint8_t> bytes;
        std::vector<std::pair<ts::FrameClass, StreamId>> units;
    };
    std::map<EgressId, Batch> batches_;
    std::uint64_t packets_parsed_ = 0;
    std::uint64_t decisions_made_ = 0;
    std::uint64_t packets_cloned_ = 0;
    std::uint64_t orphaned_ = 0;
};

} // namespace edgecast::edge

#endif
