/// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
/// failure. Each check pins the tolerances the project commits to.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <numeric>
#include <map>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "edgecast/compare.hpp"
#include "edgecast/control.hpp"
#include "edgecast/edge.hpp"
#include "edgecast/metrics.hpp"
#include "edgecast/qoc.hpp"
#include "edgecast/runtime.hpp"
#include "edgecast/scenario.hpp"
#include "edgecast/sensor.hpp"
#include "edgecast/ts.hpp"

using namespace edgecast;
using namespace std::chrono;

namespace {

int failures = 0;

void report(int criterion, const char* name, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion, name,
                detail.empty() ? "" : " — ", detail.c_str());
    if (!ok)
        ++failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---------------------------------------------------------------------------
// 1. Table reproduction, tolerance zero.

void criterion1() {
    auto table = qoc::DetectionTable::builtin();
    struct Case {
        double loss;
        qoc::DropStrategy strategy;
        double want;
    };
    const Case cases[] = {
        {0.5, qoc::DropStrategy::Uniform, 0.95},
        {1.0, qoc::DropStrategy::Uniform, 0.84},
        {2.0, qoc::DropStrategy::Uniform, 0.46},
        {5.0, qoc::DropStrategy::Uniform, 0.10},
        {0.5, qoc::DropStrategy::Differential, 0.99},
        {1.0, qoc::DropStrategy::Differential, 0.96},
        {2.0, qoc::DropStrategy::Differential, 0.74},
        {5.0, qoc::DropStrategy::Differential, 0.40},
    };
    bool ok = true;
    for (const Case& c : cases)
        ok = ok && qoc::detection_lookup(c.loss, c.strategy, table) == c.want;
    report(1, "detection table reproduction", ok,
           ok ? "8/8 values exact" : "published value mismatch");
}

// ---------------------------------------------------------------------------
// 2. Bandwidth equation arithmetic, exact to 1e-9.

void criterion2() {
    std::vector<qoc::RateModel> rates = {{1.2e6, 4.8e6}, {1.2e6, 4.8e6}};
    double full = qoc::bandwidth_full(rates, 3);

    std::vector<qoc::StreamQuality> row = {{0.5}, {0.9}};
    double q_eff = qoc::effective_quality(row).differential_keep;

    std::vector<qoc::StreamQuality> eff = {{0.5}, {0.5}};
    double saved = qoc::bandwidth_saved(rates, eff);

    bool ok = std::abs(full - 36e6) <= 1e-9 && std::abs(q_eff - 0.9) <= 1e-9 &&
              std::abs(saved - 4.8e6) <= 1e-9;
    report(2, "bandwidth equation arithmetic", ok,
           fmt("full=%.9g q_eff=%.9g saved=%.9g", full, q_eff, saved));
}

// ---------------------------------------------------------------------------
// 3. Reference preservation and realized drop rate at delta 0.5.

void criterion3() {
    sensor::StreamSource::Synthetic spec;
    spec.gop_length = 12;
    spec.packets_per_frame = 3;
    spec.num_frames = 3334;  // ~10k packets
    auto packets = sensor::generate_synthetic(spec);

    edge::PolicyEntry entry;
    entry.egresses = {{10, 0.5}, {11, 0.5}};
    entry.video_pids = {spec.video_pid};
    auto map = edge::apply_policy_update(nullptr, 5000, 1, entry);
    edge::EdgePipeline pipeline(
        map, [](edge::EgressId, std::span<const std::uint8_t>) { return true; });
    for (const auto& dg : sensor::frame_datagrams(packets))
        pipeline.ingest_datagram(5000, 1, dg);
    pipeline.flush();

    bool ok = packets.size() >= 10000;
    double worst = 0;
    for (edge::EgressId eg : {std::uint16_t(10), std::uint16_t(11)}) {
        const auto& c = pipeline.counters(1, eg);
        ok = ok && c.packets_out[ts::FrameClass::Reference] ==
                       c.packets_in[ts::FrameClass::Reference];
        ok = ok && c.packets_out[ts::FrameClass::NonVideo] ==
                       c.packets_in[ts::FrameClass::NonVideo];
        double realized = double(c.policy_suppressed) /
                          double(c.packets_in[ts::FrameClass::Differential]);
        worst = std::max(worst, std::abs(realized - 0.5));
        ok = ok && std::abs(realized - 0.5) <= 0.005;
    }
    report(3, "reference preservation at delta 0.5", ok,
           fmt("%zu packets, worst |drop-0.5|=%.3g", packets.size(), worst));
}

// ---------------------------------------------------------------------------
// 4. Fan-out byte identity and error-diffusion oracle counts.

void criterion4() {
    sensor::StreamSource::Synthetic spec;
    spec.gop_length = 12;
    spec.packets_per_frame = 3;
    spec.num_frames = 480;
    auto packets = sensor::generate_synthetic(spec);

    const double deltas[3] = {0.0, 0.25, 0.5};
    edge::PolicyEntry entry;
    for (std::uint16_t e = 0; e < 3; ++e)
        entry.egresses.push_back({e, deltas[e]});
    entry.video_pids = {spec.video_pid};
    auto map = edge::apply_policy_update(nullptr, 5000, 1, entry);

    std::map<edge::EgressId, std::vector<std::uint8_t>> sunk;
    edge::EdgePipeline pipeline(
        map, [&](edge::EgressId eg, std::span<const std::uint8_t> b) {
            sunk[eg].insert(sunk[eg].end(), b.begin(), b.end());
            return true;
        });

    std::vector<std::uint8_t> ingress_bytes;
    for (const auto& dg : sensor::frame_datagrams(packets)) {
        pipeline.ingest_datagram(5000, 1, dg);
        ingress_bytes.insert(ingress_bytes.end(), dg.begin(), dg.end());
    }
    pipeline.flush();

    bool ok = sunk[0] == ingress_bytes;
    std::string detail = ok ? "egress-0 byte-identical" : "egress-0 bytes differ";

    const auto& base = pipeline.counters(1, 0);
    const std::uint64_t diff_in = base.packets_in[ts::FrameClass::Differential];
    const std::uint64_t other_in = base.packets_in.total() - diff_in;
    for (std::uint16_t e = 0; e < 3; ++e) {
        // Error-diffusion oracle: acc += delta per differential packet,
        // drop on acc >= 1. With acc starting at 0 that is exactly
        // floor(n * delta) drops after n packets.
        std::uint64_t want_drops =
            std::uint64_t(std::floor(double(diff_in) * deltas[e] + 1e-12));
        const auto& c = pipeline.counters(1, e);
        std::uint64_t forwarded = c.packets_out.total();
        std::uint64_t want_forwarded = other_in + diff_in - want_drops;
        if (c.policy_suppressed != want_drops || forwarded != want_forwarded) {
            ok = false;
            detail += fmt("; egress %u: %llu/%llu vs oracle %llu/%llu", e,
                          (unsigned long long)c.policy_suppressed,
                          (unsigned long long)forwarded,
                          (unsigned long long)want_drops,
                          (unsigned long long)want_forwarded);
        }
    }
    if (ok)
        detail += fmt(", all 3 egress counts match oracle (%llu diff units)",
                      (unsigned long long)diff_in);
    report(4, "fan-out byte identity and suppression counts", ok, detail);
}

// ---------------------------------------------------------------------------
// 5. Strategy dominance plus a brute-force 2-GOP oracle.

double oracle_mean_ratio(const std::vector<ts::FrameClass>& frame_classes,
                         const std::vector<std::size_t>& candidates,
                         std::size_t k) {
    // Mean decodable ratio over every way to drop k of the candidate
    // single-packet frames.
    std::vector<bool> pick(candidates.size(), false);
    std::fill(pick.end() - std::ptrdiff_t(k), pick.end(), true);
    double sum = 0;
    std::size_t count = 0;
    do {
        metrics::FrameLedger ledger;
        for (std::size_t i = 0; i < frame_classes.size(); ++i)
            ledger.frames.push_back({i, frame_classes[i], 1, 1});
        for (std::size_t c = 0; c < candidates.size(); ++c)
            if (pick[c])
                ledger.frames[candidates[c]].packets_received = 0;
        sum += metrics::decodable_ratio(ledger);
        ++count;
    } while (std::next_permutation(pick.begin(), pick.end()));
    return sum / double(count);
}

void criterion5() {
    sensor::StreamSource::Synthetic spec;
    spec.gop_length = 12;
    spec.packets_per_frame = 3;
    spec.num_frames = 12 * 30;
    std::vector<std::uint32_t> seeds(10);
    for (std::uint32_t i = 0; i < 10; ++i)
        seeds[i] = 1000 + i;

    bool ok = true;
    std::string detail;
    for (double loss : {0.02, 0.05}) {
        auto cmp = metrics::compare_strategies(spec, loss, seeds);
        ok = ok && cmp.selective_ratio > cmp.uniform_ratio;
        detail += fmt("%s%.0f%%: sel %.3f vs uni %.3f", detail.empty() ? "" : "; ",
                      loss * 100, cmp.selective_ratio, cmp.uniform_ratio);
    }

    // Brute-force oracle: two GOPs of 4 single-packet frames (R D D D R D D
    // D), dropping k=2 packets. Enumerate all placements.
    std::vector<ts::FrameClass> classes = {
        ts::FrameClass::Reference,    ts::FrameClass::Differential,
        ts::FrameClass::Differential, ts::FrameClass::Differential,
        ts::FrameClass::Reference,    ts::FrameClass::Differential,
        ts::FrameClass::Differential, ts::FrameClass::Differential};
    std::vector<std::size_t> all(classes.size());
    std::iota(all.begin(), all.end(), 0u);
    std::vector<std::size_t> diff_only;
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (classes[i] == ts::FrameClass::Differential)
            diff_only.push_back(i);
    double uni = oracle_mean_ratio(classes, all, 2);
    double sel = oracle_mean_ratio(classes, diff_only, 2);
    ok = ok && sel > uni;
    detail += fmt("; 2-GOP oracle sel %.4f vs uni %.4f", sel, uni);
    report(5, "selective dominates uniform dropping", ok, detail);
}

// ---------------------------------------------------------------------------
// 6. End-to-end control loop over a 10 s loopback run.

void criterion6() {
    constexpr std::uint16_t kIngress = 47001;
    constexpr std::uint16_t kControl = 47002;

    runtime::SensorConfig scfg;
    scfg.source.stream_id = 1;
    sensor::StreamSource::Synthetic syn;
    syn.gop_length = 12;
    syn.packets_per_frame = 3;
    syn.fps = 30.0;
    scfg.source.synthetic = syn;
    scfg.edge_ingress_port = kIngress;
    scfg.control_port = 0;
    scfg.max_frames = 300;  // 10 s at 30 fps
    runtime::SensorRuntime sensor(scfg);

    runtime::EdgeConfig ecfg;
    ecfg.control_port = kControl;
    ecfg.ingresses = {{kIngress,
                       1,
                       {syn.video_pid},
                       runtime::resolve("127.0.0.1", sensor.control_port())}};
    runtime::EdgeRuntime edge(ecfg);
    edge.start();
    sensor.start();

    runtime::SinkRuntime sink("127.0.0.1", 0, {syn.video_pid});
    control::SinkRegister reg;
    reg.process_id = 30;
    reg.egress_ip = 0;
    reg.egress_port = sink.port();
    reg.strategy = 1;
    reg.thresholds = {{1, control::to_fixed(0.96)}};
    bool registered =
        sink.register_with_edge(runtime::resolve("127.0.0.1", kControl), reg);
    sink.start();

    // Let the 300-frame budget play out (10 s plus slack).
    auto deadline = steady_clock::now() + seconds(13);
    while (steady_clock::now() < deadline &&
           sensor.counters().packets_in[ts::FrameClass::Differential] < 825 * 1)
        std::this_thread::sleep_for(milliseconds(100));
    std::this_thread::sleep_for(milliseconds(200));

    double keep = sensor.configured_keep();
    double active_s = sensor.active_seconds();
    auto counters = sensor.counters();
    sensor.stop();
    edge.stop();
    sink.stop();

    qoc::RateModel model = scenario::derive_rate_model(syn);
    double predicted = model.bitrate({0.99});
    double measured =
        active_s > 0 ? 8.0 * double(counters.bytes_out()) / active_s : 0;
    double rel = predicted > 0 ? std::abs(measured - predicted) / predicted : 1.0;

    bool ok = registered && std::abs(keep - 0.99) < 1e-3 && rel <= 0.05;
    report(6, "end-to-end notify and bitrate", ok,
           fmt("keep=%.4f, measured %.0f bps vs predicted %.0f bps (%.1f%% off, "
               "%.1f s active)",
               keep, measured, predicted, rel * 100, active_s));
}

// ---------------------------------------------------------------------------
// 7. Codec round-trip and malformed corpus.

void criterion7() {
    std::mt19937 rng(42);
    std::uniform_int_distribution<int> u16(0, 0xFFFF);
    std::uniform_int_distribution<int> u8(0, 0xFF);

    bool ok = true;
    for (int i = 0; i < 10000 && ok; ++i) {
        control::ControlMessage msg;
        switch (i % 4) {
            case 0:
                msg = control::QualityNotify{std::uint16_t(u16(rng)),
                                             std::uint16_t(u16(rng))};
                break;
            case 1: {
                control::PolicyUpdate pu{std::uint16_t(u16(rng)), {}};
                for (int j = 0; j < i % 7; ++j)
                    pu.egresses.push_back(
                        {std::uint16_t(u16(rng)), std::uint16_t(u16(rng))});
                msg = pu;
                break;
            }
            case 2: {
                control::SinkRegister sr{
                    std::uint16_t(u16(rng)),
                    std::uint32_t(u16(rng)) << 16 | std::uint32_t(u16(rng)),
                    std::uint16_t(u16(rng)), std::uint8_t(i % 2), {}};
                for (int j = 0; j < i % 5; ++j)
                    sr.thresholds.push_back(
                        {std::uint16_t(u16(rng)), std::uint16_t(u16(rng))});
                msg = sr;
                break;
            }
            default:
                msg = control::Ack{std::uint8_t(1 + i % 4),
                                   std::uint32_t(u16(rng)) << 16 |
                                       std::uint32_t(u16(rng))};
                break;
        }
        ok = ok && control::decode(control::encode(msg)) == msg;
    }
    std::string detail = ok ? "10000 round trips exact" : "round trip mismatch";

    auto expect = [&](std::vector<std::uint8_t> bytes, const char* want,
                      auto exception_tag) {
        using E = std::decay_t<decltype(exception_tag)>;
        try {
            control::decode(bytes);
        } catch (const E&) {
            return;
        } catch (const std::exception&) {
        }
        ok = false;
        detail += fmt("; corpus case expected %s", want);
    };
    auto good = control::encode(control::QualityNotify{3, 0xFFFF});
    expect({}, "Truncated", control::Truncated{""});
    expect({0x45}, "Truncated", control::Truncated{""});
    {
        auto b = good;
        b[0] = 0x00;
        expect(b, "BadMagic", control::BadMagic{});
    }
    {
        auto b = good;
        b[2] = 9;
        expect(b, "BadVersion", control::BadVersion{});
    }
    {
        auto b = good;
        b[3] = 0;
        expect(b, "UnknownType", control::UnknownType{0});
    }
    {
        auto b = good;
        b.pop_back();
        expect(b, "Truncated", control::Truncated{""});
    }
    {
        auto b = good;
        b.push_back(0);
        expect(b, "Truncated(trailing)", control::Truncated{""});
    }
    {
        auto b = control::encode(control::PolicyUpdate{1, {{2, 3}}});
        b[6] = 200;  // count promises far more than the datagram holds
        expect(b, "Truncated(count)", control::Truncated{""});
    }
    report(7, "control codec round-trip and malformed corpus", ok, detail);
}

// ---------------------------------------------------------------------------
// 8. Throughput smoke: >= 100 Mbps ingress, 2-way fan-out, 30 s.

void criterion8() {
    constexpr std::uint16_t kIngress = 47101;
    constexpr std::uint16_t kControl = 47102;

    runtime::EdgeConfig ecfg;
    ecfg.control_port = kControl;
    ecfg.ingresses = {{kIngress, 1, {0x0100}, {}}};
    runtime::EdgeRuntime edge(ecfg);
    edge.start();

    runtime::SinkRuntime sink_a("127.0.0.1", 0, {0x0100});
    runtime::SinkRuntime sink_b("127.0.0.1", 0, {0x0100});
    sink_a.start();
    sink_b.start();

    auto register_sink = [&](std::uint16_t pid, std::uint16_t port) {
        control::SinkRegistration reg;
        reg.process_id = pid;
        reg.egress_ip = runtime::resolve("127.0.0.1", 0).ip;
        reg.egress_port = port;
        reg.strategy = qoc::DropStrategy::Differential;
        reg.thresholds[1] = 0.74;
        edge.register_sink(reg);
    };
    register_sink(40, sink_a.port());
    register_sink(41, sink_b.port());

    // Pre-built 7-unit datagrams replayed in a paced loop. Replaying the
    // same bytes repeats continuity counters, which only bumps the gap
    // diagnostic.
    sensor::StreamSource::Synthetic spec;
    spec.num_frames = 1200;
    auto dgs = sensor::frame_datagrams(sensor::generate_synthetic(spec));

    runtime::UdpSocket tx;
    tx.bind("127.0.0.1", 0);
    auto edge_ep = runtime::resolve("127.0.0.1", kIngress);

    const double target_bps = 115e6;
    const auto tick = milliseconds(5);
    const std::size_t dgram_bits = dgs[0].size() * 8;
    const std::size_t per_tick =
        std::size_t(target_bps * 0.005 / double(dgram_bits));

    std::uint64_t bytes_sent = 0;
    auto start = steady_clock::now();
    auto next = start;
    std::size_t cursor = 0;
    while (steady_clock::now() - start < seconds(30)) {
        for (std::size_t i = 0; i < per_tick; ++i) {
            const auto& dg = dgs[cursor];
            tx.send_to(edge_ep, dg);
            bytes_sent += dg.size();
            cursor = (cursor + 1) % dgs.size();
        }
        next += tick;
        std::this_thread::sleep_until(next);
    }
    double elapsed = duration<double>(steady_clock::now() - start).count();
    std::this_thread::sleep_for(milliseconds(200));

    auto snap = edge.snapshot();
    edge.stop();
    sink_a.stop();
    sink_b.stop();

    double sent_bps = 8.0 * double(bytes_sent) / elapsed;
    double parsed_bps = 8.0 * double(snap.packets_parsed) * ts::kPacketSize / elapsed;
    std::uint64_t overflow = 0;
    for (const auto& [key, c] : snap.counters)
        overflow += c.overflow_dropped;

    bool ok = sent_bps >= 100e6 && parsed_bps >= 100e6 && overflow == 0;
    report(8, "100 Mbps 2-way fan-out without overflow", ok,
           fmt("sent %.1f Mbps, parsed %.1f Mbps, overflow drops %llu, 30 s",
               sent_bps / 1e6, parsed_bps / 1e6, (unsigned long long)overflow));
}

// ---------------------------------------------------------------------------
// 9. CPU-proxy cost decreases linearly with slope -c_clone.

void criterion9() {
    sensor::StreamSource::Synthetic spec;
    spec.num_frames = 600;
    auto packets = sensor::generate_synthetic(spec);
    auto dgs = sensor::frame_datagrams(packets);

    metrics::CpuProxy proxy;
    std::vector<double> xs, ys;  // suppressed count -> proxy cost
    for (double delta : {0.0, 0.1, 0.2, 0.3, 0.4}) {
        edge::PolicyEntry entry;
        entry.egresses = {{10, delta}};
        entry.video_pids = {spec.video_pid};
        auto map = edge::apply_policy_update(nullptr, 5000, 1, entry);
        edge::EdgePipeline pipeline(
            map, [](edge::EgressId, std::span<const std::uint8_t>) { return true; });
        for (const auto& dg : dgs)
            pipeline.ingest_datagram(5000, 1, dg);
        pipeline.flush();
        xs.push_back(double(pipeline.counters(1, 10).policy_suppressed));
        ys.push_back(proxy.total(pipeline.packets_parsed(),
                                 pipeline.decisions_made(),
                                 pipeline.packets_cloned()));
    }

    // Least-squares fit y = a + b x; expect b == -c_clone with residual
    // essentially zero because parse and decision work are fixed.
    double n = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double a = (sy - b * sx) / n;
    double residual = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double e = ys[i] - (a + b * xs[i]);
        residual += e * e;
    }
    double rms = std::sqrt(residual / n);

    bool ok = std::abs(b + proxy.c_clone) < 1e-9 && rms < 1e-6;
    report(9, "cpu proxy slope is -c_clone", ok,
           fmt("slope %.9f (want %.1f), rms residual %.3g", b, -proxy.c_clone, rms));
}

} // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    if (failures == 0)
        std::printf("all 9 criteria passed\n");
    else
        std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
