#include "edgecast/compare.hpp"
#include "edgecast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "edgecast/sensor.hpp"

namespace edgecast::metrics {

double decodable_ratio(const FrameLedger& ledger) {
    if (ledger.frames.empty())
        return 1.0;
    std::size_t decodable = 0;
    bool chain_ok = false;
    for (const FrameRecord& f : ledger.frames) {
        if (f.frame_class == ts::FrameClass::Reference)
            chain_ok = f.delivered();
        else
            chain_ok = chain_ok && f.delivered();
        if (chain_ok)
            ++decodable;
    }
    return double(decodable) / double(ledger.frames.size());
}

namespace {

struct FrameLayout {
    std::vector<FrameRecord> frames;         // template ledger, fully received
    std::vector<std::size_t> packet_frame;   // video packet index -> frame index
    std::vector<std::size_t> differential;   // indices of differential packets
};

FrameLayout layout_stream(const sensor::StreamSource::Synthetic& spec) {
    auto packets = sensor::generate_synthetic(spec);
    FrameLayout out;
    std::map<std::uint16_t, ts::PidState> states;
    for (const auto& pkt : packets) {
        auto& st = states[pkt.pid];
        if (st.last_continuity == std::nullopt && st.frame_index == 0) {
            st.pid = pkt.pid;
            st.is_video = (pkt.pid == spec.video_pid);
        }
        ts::FrameClass cls = ts::classify_packet(st, pkt);
        if (cls == ts::FrameClass::NonVideo)
            continue;
        if (pkt.pusi || out.frames.empty())
            out.frames.push_back({st.frame_index, cls, 0, 0});
        FrameRecord& f = out.frames.back();
        std::size_t pkt_index = out.packet_frame.size();
        out.packet_frame.push_back(out.frames.size() - 1);
        f.packets_expected++;
        f.packets_received++;
        if (cls == ts::FrameClass::Differential)
            out.differential.push_back(pkt_index);
    }
    return out;
}

double ratio_with_drops(const FrameLayout& layout,
                        std::span<const std::size_t> dropped) {
    FrameLedger ledger{layout.frames};
    for (std::size_t p : dropped)
        ledger.frames[layout.packet_frame[p]].packets_received--;
    return decodable_ratio(ledger);
}

} // namespace

StrategyComparison compare_strategies(const sensor::StreamSource::Synthetic& spec,
                                      double loss_fraction,
                                      std::span<const std::uint32_t> seeds) {
    FrameLayout layout = layout_stream(spec);
    const std::size_t total = layout.packet_frame.size();
    const std::size_t k = static_cast<std::size_t>(
        std::llround(loss_fraction * double(total)));

    double uniform_sum = 0, selective_sum = 0;
    for (std::uint32_t seed : seeds) {
        std::mt19937 rng(seed);

        std::vector<std::size_t> all(total);
        std::iota(all.begin(), all.end(), 0u);
        std::shuffle(all.begin(), all.end(), rng);
        uniform_sum += ratio_with_drops(
            layout, std::span(all).subspan(0, std::min(k, total)));

        // Selective dropping concentrates the same loss on differential
        // packets, spilling into the rest only when those run out.
        std::vector<std::size_t> diff = layout.differential;
        std::shuffle(diff.begin(), diff.end(), rng);
        std::vector<std::size_t> selective(diff.begin(),
                                           diff.begin() + std::min(k, diff.size()));
        if (k > diff.size()) {
            std::vector<std::size_t> rest;
            for (std::size_t p : all)
                if (std::find(diff.begin(), diff.end(), p) == diff.end())
                    rest.push_back(p);
            std::size_t spill = std::min(k - diff.size(), rest.size());
            selective.insert(selective.end(), rest.begin(), rest.begin() + spill);
        }
        selective_sum += ratio_with_drops(layout, selective);
    }
    const double n = double(seeds.size());
    return {uniform_sum / n, selective_sum / n};
}

} // namespace edgecast::metrics
