#ifndef EDGECAST_METRICS_HPP
#define EDGECAST_METRICS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "edgecast/ts.hpp"

namespace edgecast::metrics {

/// Per-class packet counts. Indexed by ts::FrameClass.
struct ClassCounts {
    std::array<std::uint64_t, 4> by_class{};

    std::uint64_t& operator[](ts::FrameClass c) {
        return by_class[static_cast<std::size_t>(c)];
    }
    std::uint64_t operator[](ts::FrameClass c) const {
        return by_class[static_cast<std::size_t>(c)];
    }
    std::uint64_t total() const {
        std::uint64_t t = 0;
        for (auto v : by_class) t += v;
        return t;
    }
};

/// Data-path counters for one (stream, egress) pair or one sensor path.
struct PathCounters {
    ClassCounts packets_in;
    ClassCounts packets_out;
    std::uint64_t policy_suppressed = 0;
    std::uint64_t overflow_dropped = 0;
    std::uint64_t orphaned = 0;
    std::uint64_t unknown_class = 0;
    std::uint64_t continuity_gaps = 0;

    std::uint64_t bytes_in() const { return packets_in.total() * ts::kPacketSize; }
    std::uint64_t bytes_out() const { return packets_out.total() * ts::kPacketSize; }
};

/// One frame's delivery record at an egress.
struct FrameRecord {
    std::uint64_t frame_index = 0;
    ts::FrameClass frame_class = ts::FrameClass::Unknown;
    std::uint32_t packets_expected = 0;
    std::uint32_t packets_received = 0;

    bool delivered() const {
        return packets_expected > 0 && packets_received == packets_expected;
    }
};

/// Frame ledger for the decodable-frame quality proxy. A frame is decodable
/// iff it was fully delivered and every frame back to (and including) the
/// nearest reference frame is decodable.
struct FrameLedger {
    std::vector<FrameRecord> frames;
};

/// Decodable frames / total frames under the dependency chain rule.
double decodable_ratio(const FrameLedger& ledger);

/// Deterministic cost model standing in for CPU measurement. Total cost is
/// linear in the counters, so suppression reduces it with slope c_clone.
struct CpuProxy {
    double c_parse = 1.0;   // per ingested packet
    double c_decide = 0.2;  // per per-egress decision
    double c_clone = 2.5;   // per forwarded copy

    double total(std::uint64_t parsed, std::uint64_t decisions,
                 std::uint64_t cloned) const {
        return c_parse * double(parsed) + c_decide * double(decisions) +
               c_clone * double(cloned);
    }
};

/// Mean decodable ratios of uniform vs differential-first dropping at equal
/// total packet loss, averaged over seeded runs of a synthetic stream.
struct StrategyComparison {
    double uniform_ratio;
    double selective_ratio;
};

} // namespace edgecast::metrics

#endif
