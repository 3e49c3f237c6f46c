#include "edgecast/edge.hpp"

#include <algorithm>

namespace edgecast::edge {

PolicySnapshot apply_policy_update(const PolicySnapshot& map, IngressPort ingress,
                                   StreamId stream, PolicyEntry entry) {
    for (const EgressPolicy& e : entry.egresses)
        if (e.delta < 0.0 || e.delta > 1.0)
            throw InvalidDelta("delta " + std::to_string(e.delta) +
                               " outside [0,1] for egress " +
                               std::to_string(e.egress_id));
    auto next = std::make_shared<PolicyMap>(map ? *map : PolicyMap{});
    next->version = (map ? map->version : 0) + 1;
    if (entry.egresses.empty())
        next->entries.erase({ingress, stream});
    else
        next->entries[{ingress, stream}] = std::move(entry);
    return next;
}

EgressDecision decide(ts::FrameClass cls, const PolicyEntry& entry,
                      std::map<EgressId, SuppressionState>& state) {
    EgressDecision decision;
    decision.frame_class = cls;
    decision.actions.reserve(entry.egresses.size());
    for (const EgressPolicy& eg : entry.egresses) {
        SuppressionState& st = state[eg.egress_id];
        Action act = Action::Forward;
        if (cls == ts::FrameClass::Differential && eg.delta > 0.0) {
            st.accumulator += eg.delta;
            if (st.accumulator >= 1.0) {
                st.accumulator -= 1.0;
                act = Action::Suppress;
            }
        }
        if (act == Action::Forward)
            ++st.forwarded;
        else
            ++st.dropped;
        decision.actions.emplace_back(eg.egress_id, act);
    }
    return decision;
}

EdgeControlResult edge_control(
    const PolicySnapshot& current, std::span<const StreamDesc> streams,
    std::span<const EgressId> egress_of_process,
    const std::map<std::pair<std::size_t, std::size_t>, qoc::QocRequirement>& thresholds,
    const qoc::DetectionTable& table) {
    auto sol = qoc::solve_min_bandwidth(thresholds, table, streams.size(),
                                        egress_of_process.size());

    auto next = std::make_shared<PolicyMap>();
    next->version = (current ? current->version : 0) + 1;
    for (std::size_t i = 0; i < streams.size(); ++i) {
        PolicyEntry entry;
        entry.video_pids = streams[i].video_pids;
        for (std::size_t j = 0; j < egress_of_process.size(); ++j) {
            if (!thresholds.contains({i, j}))
                continue;
            entry.egresses.push_back(
                {egress_of_process[j], sol.delta.at(i, j)});
        }
        if (!entry.egresses.empty())
            next->entries[{streams[i].ingress, streams[i].id}] = std::move(entry);
    }
    return {std::move(next), std::move(sol.q_eff), std::move(sol.delta)};
}

EdgePipeline::EdgePipeline(PolicySnapshot map, EmitFn emit, std::size_t batch_units)
    : map_(std::move(map)), emit_(std::move(emit)), batch_units_(batch_units) {}

void EdgePipeline::set_policy(PolicySnapshot map) { map_ = std::move(map); }

const metrics::PathCounters& EdgePipeline::counters(StreamId stream,
                                                    EgressId egress) const {
    static const metrics::PathCounters kEmpty{};
    auto it = counters_.find({stream, egress});
    return it == counters_.end() ? kEmpty : it->second;
}

void EdgePipeline::emit_unit(StreamId stream, EgressId egress,
                             const ts::TsPacket& pkt, ts::FrameClass cls) {
    Batch& batch = batches_[egress];
    batch.bytes.insert(batch.bytes.end(), pkt.raw.begin(), pkt.raw.end());
    batch.units.emplace_back(cls, stream);
    ++packets_cloned_;
    if (batch.units.size() >= batch_units_) {
        bool ok = emit_(egress, batch.bytes);
        for (auto [ucls, ustream] : batch.units) {
            auto& ctr = counters_[{ustream, egress}];
            if (ok)
                ctr.packets_out[ucls]++;
            else
                ctr.overflow_dropped++;
        }
        batch.bytes.clear();
        batch.units.clear();
    }
}

void EdgePipeline::flush() {
    for (auto& [egress, batch] : batches_) {
        if (batch.units.empty())
            continue;
        bool ok = emit_(egress, batch.bytes);
        for (auto [ucls, ustream] : batch.units) {
            auto& ctr = counters_[{ustream, egress}];
            if (ok)
                ctr.packets_out[ucls]++;
            else
                ctr.overflow_dropped++;
        }
        batch.bytes.clear();
        batch.units.clear();
    }
}

void EdgePipeline::ingest_datagram(IngressPort ingress, StreamId stream,
                                   std::span<const std::uint8_t> payload) {
    // The snapshot taken here governs the whole datagram.
    PolicySnapshot snapshot = map_;
    const PolicyEntry* entry =
        snapshot ? snapshot->find(ingress, stream) : nullptr;

    auto units = ts::scan_datagram(payload);
    packets_parsed_ += units.size();

    for (const ts::TsPacket& pkt : units) {
        auto& st = pid_states_[{stream, pkt.pid}];
        if (st.last_continuity == std::nullopt && st.frame_index == 0) {
            st.pid = pkt.pid;
            st.is_video = entry && entry->video_pids.contains(pkt.pid);
        }
        ts::FrameClass cls = ts::classify_packet(st, pkt);

        if (!entry || entry->egresses.empty()) {
            ++orphaned_;
            continue;
        }

        EgressDecision decision = decide(cls, *entry, suppression_[stream]);
        decisions_made_ += decision.actions.size();

        for (auto [egress, act] : decision.actions) {
            auto& ctr = counters_[{stream, egress}];
            ctr.packets_in[cls]++;
            if (cls == ts::FrameClass::Unknown)
                ctr.unknown_class++;
            if (act == Action::Forward)
                emit_unit(stream, egress, pkt, cls);
            else
                ctr.policy_suppressed++;
        }
    }

    // Roll continuity-gap totals into the per-pair counters lazily.
    std::uint64_t gaps = 0;
    for (const auto& [key, st] : pid_states_)
        if (key.first == stream)
            gaps += st.continuity_gaps;
    if (entry)
        for (const EgressPolicy& eg : entry->egresses)
            counters_[{stream, eg.egress_id}].continuity_gaps = gaps;
}

} // namespace edgecast::edge
