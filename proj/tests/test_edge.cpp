#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "edgecast/edge.hpp"
#include "edgecast/sensor.hpp"

using namespace edgecast;

namespace {

edge::PolicySnapshot empty_map() {
    return std::make_shared<const edge::PolicyMap>();
}

sensor::StreamSource::Synthetic default_spec(std::uint32_t frames = 24) {
    sensor::StreamSource::Synthetic spec;
    spec.num_frames = frames;
    return spec;
}

std::vector<std::vector<std::uint8_t>> datagrams_for(
    const sensor::StreamSource::Synthetic& spec) {
    return sensor::frame_datagrams(sensor::generate_synthetic(spec));
}

} // namespace

TEST_CASE("policy updates bump the version and validate deltas") {
    auto v0 = empty_map();
    CHECK(v0->version == 0);

    edge::PolicyEntry entry;
    entry.egresses = {{10, 0.0}, {11, 0.25}};
    entry.video_pids = {0x0100};
    auto v1 = edge::apply_policy_update(v0, 5000, 1, entry);
    CHECK(v1->version == 1);
    REQUIRE(v1->find(5000, 1) != nullptr);
    CHECK(v1->find(5000, 1)->egresses.size() == 2);
    CHECK(v0->entries.empty());  // snapshots are immutable

    entry.egresses = {{10, 1.5}};
    CHECK_THROWS_AS(edge::apply_policy_update(v1, 5000, 1, entry),
                    edge::InvalidDelta);

    // An empty entry removes the stream.
    auto v2 = edge::apply_policy_update(v1, 5000, 1, edge::PolicyEntry{});
    CHECK(v2->version == 2);
    CHECK(v2->find(5000, 1) == nullptr);
}

TEST_CASE("decide forwards everything except error-diffused differentials") {
    edge::PolicyEntry entry;
    entry.egresses = {{10, 0.0}, {11, 0.5}};
    std::map<edge::EgressId, edge::SuppressionState> state;

    for (auto cls : {ts::FrameClass::Reference, ts::FrameClass::NonVideo,
                     ts::FrameClass::Unknown}) {
        std::map<edge::EgressId, edge::SuppressionState> fresh;
        auto d = edge::decide(cls, entry, fresh);
        for (const auto& [eg, act] : d.actions)
            CHECK(act == edge::Action::Forward);
    }

    // delta=0.5: exactly half of 100 differential packets dropped on egress
    // 11, none on egress 10.
    for (int i = 0; i < 100; ++i)
        edge::decide(ts::FrameClass::Differential, entry, state);
    CHECK(state[10].dropped == 0);
    CHECK(state[10].forwarded == 100);
    CHECK(state[11].dropped == 50);
    CHECK(state[11].forwarded == 50);
}

TEST_CASE("error diffusion realizes exact drop counts for any rate") {
    for (double delta : {0.1, 0.25, 1.0 / 3.0, 0.73}) {
        edge::PolicyEntry entry;
        entry.egresses = {{7, delta}};
        std::map<edge::EgressId, edge::SuppressionState> state;
        const int n = 997;
        for (int i = 0; i < n; ++i)
            edge::decide(ts::FrameClass::Differential, entry, state);
        auto dropped = state[7].dropped;
        CHECK(dropped >= std::uint64_t(std::floor(n * delta)));
        CHECK(dropped <= std::uint64_t(std::ceil(n * delta)));
    }
}

TEST_CASE("edge_control produces the policy map and sensor qualities") {
    std::vector<edge::StreamDesc> streams = {{5000, 1, {0x0100}},
                                             {5001, 2, {0x0100}}};
    std::vector<edge::EgressId> egress_of_process = {10, 11};
    std::map<std::pair<std::size_t, std::size_t>, qoc::QocRequirement> thr = {
        {{0, 0}, {0.96, qoc::DropStrategy::Differential}},
        {{0, 1}, {0.74, qoc::DropStrategy::Differential}},
    };
    auto result = edge::edge_control(empty_map(), streams, egress_of_process, thr,
                                     qoc::DetectionTable::builtin());
    CHECK(result.map->version == 1);
    // Stream 2 has no consumer: no entry at all.
    CHECK(result.map->find(5001, 2) == nullptr);
    const auto* entry = result.map->find(5000, 1);
    REQUIRE(entry != nullptr);
    REQUIRE(entry->egresses.size() == 2);
    CHECK(result.q_eff[0].differential_keep == doctest::Approx(0.99));
    CHECK(entry->egresses[0].egress_id == 10);
    CHECK(entry->egresses[0].delta == doctest::Approx(0.0));
    CHECK(entry->egresses[1].egress_id == 11);
    CHECK(entry->egresses[1].delta == doctest::Approx(1.0 - 0.98 / 0.99));
}

TEST_CASE("pipeline clones a stream to every egress byte-identically at delta zero") {
    edge::PolicyEntry entry;
    entry.egresses = {{10, 0.0}, {11, 0.0}};
    entry.video_pids = {0x0100};
    auto map = edge::apply_policy_update(empty_map(), 5000, 1, entry);

    std::map<edge::EgressId, std::vector<std::uint8_t>> sunk;
    edge::EdgePipeline pipeline(map, [&](edge::EgressId eg,
                                         std::span<const std::uint8_t> bytes) {
        sunk[eg].insert(sunk[eg].end(), bytes.begin(), bytes.end());
        return true;
    });

    auto spec = default_spec();
    std::vector<std::uint8_t> sent;
    for (const auto& dg : datagrams_for(spec)) {
        pipeline.ingest_datagram(5000, 1, dg);
        sent.insert(sent.end(), dg.begin(), dg.end());
    }
    pipeline.flush();

    CHECK(sunk[10] == sent);
    CHECK(sunk[11] == sent);
    CHECK(pipeline.counters(1, 10).policy_suppressed == 0);
}

TEST_CASE("per-egress suppression is independent") {
    edge::PolicyEntry entry;
    entry.egresses = {{10, 0.0}, {11, 0.5}};
    entry.video_pids = {0x0100};
    auto map = edge::apply_policy_update(empty_map(), 5000, 1, entry);

    std::map<edge::EgressId, std::uint64_t> bytes_out;
    edge::EdgePipeline pipeline(map, [&](edge::EgressId eg,
                                         std::span<const std::uint8_t> b) {
        bytes_out[eg] += b.size();
        return true;
    });

    sensor::StreamSource::Synthetic spec;
    spec.gop_length = 101;  // 100 differential frames
    spec.packets_per_frame = 1;
    spec.num_frames = 101;
    for (const auto& dg : datagrams_for(spec))
        pipeline.ingest_datagram(5000, 1, dg);
    pipeline.flush();

    const auto& full = pipeline.counters(1, 10);
    const auto& half = pipeline.counters(1, 11);
    CHECK(full.packets_out[ts::FrameClass::Differential] == 100);
    CHECK(half.packets_out[ts::FrameClass::Differential] == 50);
    CHECK(half.policy_suppressed == 50);
    CHECK(half.packets_out[ts::FrameClass::Reference] ==
          full.packets_out[ts::FrameClass::Reference]);
    CHECK(bytes_out[10] == full.bytes_out());
    CHECK(bytes_out[11] == half.bytes_out());
}

TEST_CASE("datagrams with no policy entry are orphaned, not forwarded") {
    std::size_t emits = 0;
    edge::EdgePipeline pipeline(empty_map(),
                                [&](edge::EgressId, std::span<const std::uint8_t>) {
                                    ++emits;
                                    return true;
                                });
    auto spec = default_spec(6);
    for (const auto& dg : datagrams_for(spec))
        pipeline.ingest_datagram(5000, 9, dg);
    pipeline.flush();
    CHECK(emits == 0);
    CHECK(pipeline.orphaned() == 2 + 6 * 3);
}

TEST_CASE("policy snapshots apply per datagram, not mid-datagram") {
    edge::PolicyEntry keep_all;
    keep_all.egresses = {{10, 0.0}};
    keep_all.video_pids = {0x0100};
    auto v1 = edge::apply_policy_update(empty_map(), 5000, 1, keep_all);

    std::uint64_t units = 0;
    edge::EdgePipeline pipeline(v1, [&](edge::EgressId,
                                        std::span<const std::uint8_t> b) {
        units += b.size() / ts::kPacketSize;
        return true;
    });

    auto spec = default_spec();
    auto dgs = datagrams_for(spec);
    pipeline.ingest_datagram(5000, 1, dgs[0]);

    // Swap to drop-everything-differential before the second datagram.
    edge::PolicyEntry drop_all = keep_all;
    drop_all.egresses = {{10, 1.0}};
    pipeline.set_policy(edge::apply_policy_update(v1, 5000, 1, drop_all));

    pipeline.ingest_datagram(5000, 1, dgs[1]);
    pipeline.flush();

    const auto& c = pipeline.counters(1, 10);
    // First datagram forwarded in full; second datagram forwarded only its
    // non-differential units.
    CHECK(c.packets_out.total() ==
          14 - c.packets_in[ts::FrameClass::Differential] +
              (c.packets_in[ts::FrameClass::Differential] -
               c.policy_suppressed));
    CHECK(units == c.packets_out.total());
    CHECK(pipeline.policy()->version == 2);
}

TEST_CASE("emit batches are at most seven units and rejection counts overflow") {
    edge::PolicyEntry entry;
    entry.egresses = {{10, 0.0}};
    entry.video_pids = {0x0100};
    auto map = edge::apply_policy_update(empty_map(), 5000, 1, entry);

    std::vector<std::size_t> sizes;
    bool accept = true;
    edge::EdgePipeline pipeline(map, [&](edge::EgressId,
                                         std::span<const std::uint8_t> b) {
        sizes.push_back(b.size());
        return accept;
    });

    auto spec = default_spec();
    auto dgs = datagrams_for(spec);
    for (const auto& dg : dgs)
        pipeline.ingest_datagram(5000, 1, dg);
    pipeline.flush();
    for (auto s : sizes) {
        CHECK(s % ts::kPacketSize == 0);
        CHECK(s <= 7 * ts::kPacketSize);
    }

    accept = false;
    std::uint64_t before = pipeline.counters(1, 10).overflow_dropped;
    pipeline.ingest_datagram(5000, 1, dgs[0]);
    pipeline.flush();
    CHECK(pipeline.counters(1, 10).overflow_dropped ==
          before + dgs[0].size() / ts::kPacketSize);
}

TEST_CASE("cpu proxy counters track parse, decision and clone work") {
    edge::PolicyEntry entry;
    entry.egresses = {{10, 0.0}, {11, 0.0}, {12, 0.0}};
    entry.video_pids = {0x0100};
    auto map = edge::apply_policy_update(empty_map(), 5000, 1, entry);

    edge::EdgePipeline pipeline(map,
                                [](edge::EgressId, std::span<const std::uint8_t>) {
                                    return true;
                                });
    auto spec = default_spec();
    auto dgs = datagrams_for(spec);
    std::uint64_t total_units = 0;
    for (const auto& dg : dgs) {
        pipeline.ingest_datagram(5000, 1, dg);
        total_units += dg.size() / ts::kPacketSize;
    }
    pipeline.flush();
    CHECK(pipeline.packets_parsed() == total_units);
    CHECK(pipeline.decisions_made() == total_units * 3);
    CHECK(pipeline.packets_cloned() == total_units * 3);

    metrics::CpuProxy proxy;
    CHECK(proxy.total(pipeline.packets_parsed(), pipeline.decisions_made(),
                      pipeline.packets_cloned()) ==
          doctest::Approx(total_units * (1.0 + 3 * 0.2 + 3 * 2.5)));
}
