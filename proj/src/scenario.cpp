#include "edgecast/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <thread>

#include "edgecast/compare.hpp"
#include "edgecast/control.hpp"
#include "edgecast/report.hpp"
#include "edgecast/runtime.hpp"

namespace edgecast::scenario {

namespace {

qoc::DropStrategy parse_strategy(const std::string& s) {
    if (s == "uniform")
        return qoc::DropStrategy::Uniform;
    if (s == "differential")
        return qoc::DropStrategy::Differential;
    throw std::runtime_error("unknown strategy: " + s);
}

std::string strategy_name(qoc::DropStrategy s) {
    return s == qoc::DropStrategy::Uniform ? "uniform" : "differential";
}

} // namespace

Scenario Scenario::parse(const json& doc) {
    Scenario sc;
    sc.duration_s = doc.value("duration_s", 10.0);
    sc.seed = doc.value("seed", 1u);
    sc.report_path = doc.value("report", "report.json");
    if (doc.contains("detection_table") && !doc["detection_table"].is_null())
        sc.detection_table_path = doc["detection_table"].get<std::string>();
    sc.edge_control_port = doc.value("edge_control_port", 9900);

    for (const json& s : doc.value("sensors", json::array())) {
        SensorSpec spec;
        spec.source.stream_id = s.at("stream_id").get<std::uint16_t>();
        spec.edge_host = s.value("edge_host", "127.0.0.1");
        spec.edge_ingress_port = s.at("edge_ingress_port").get<std::uint16_t>();
        spec.control_port = s.value("control_port", 0);
        const json& src = s.at("source");
        std::string type = src.value("type", "synthetic");
        if (type == "synthetic") {
            sensor::StreamSource::Synthetic syn;
            syn.gop_length = src.value("gop", 12u);
            syn.packets_per_frame = src.value("packets_per_frame", 3u);
            syn.ref_size_multiplier = src.value("ref_size_multiplier", 1.0);
            syn.fps = src.value("fps", 30.0);
            syn.video_pid = src.value("video_pid", 0x0100);
            syn.num_frames = src.value("num_frames", 0u);
            syn.seed = src.value("seed", sc.seed);
            spec.source.synthetic = syn;
        } else if (type == "file") {
            spec.source.replay_path = src.at("path").get<std::string>();
            spec.source.replay_fps = src.value("fps", 30.0);
            spec.source.replay_video_pid = src.value("video_pid", 0x0100);
        } else {
            throw std::runtime_error("unknown source type: " + type);
        }
        if (s.contains("rate_model"))
            spec.rate_model = qoc::RateModel{
                s["rate_model"].value("ref_rate_bps", 0.0),
                s["rate_model"].value("diff_rate_bps", 0.0)};
        sc.sensors.push_back(std::move(spec));
    }

    for (const json& p : doc.value("processes", json::array())) {
        ProcessSpec spec;
        spec.process_id = p.at("process_id").get<std::uint16_t>();
        spec.egress_host = p.value("egress_host", "127.0.0.1");
        spec.egress_port = p.at("egress_port").get<std::uint16_t>();
        spec.strategy = parse_strategy(p.value("strategy", "differential"));
        for (const auto& [key, value] : p.at("thresholds").items())
            spec.thresholds[static_cast<std::uint16_t>(std::stoi(key))] =
                value.get<double>();
        sc.processes.push_back(std::move(spec));
    }

    for (const json& t : doc.value("timeline", json::array())) {
        TimelineAction a;
        a.at_s = t.at("at_s").get<double>();
        a.action = t.at("action").get<std::string>();
        a.params = t.value("params", json::object());
        sc.timeline.push_back(std::move(a));
    }
    return sc;
}

Scenario Scenario::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open scenario: " + path);
    json doc = json::parse(in);
    return parse(doc);
}

json Scenario::to_json() const {
    json doc;
    doc["duration_s"] = duration_s;
    doc["seed"] = seed;
    doc["report"] = report_path;
    doc["edge_control_port"] = edge_control_port;
    doc["sensors"] = json::array();
    for (const SensorSpec& s : sensors) {
        json e;
        e["stream_id"] = s.source.stream_id;
        e["edge_ingress_port"] = s.edge_ingress_port;
        if (s.source.synthetic) {
            const auto& syn = *s.source.synthetic;
            e["source"] = {{"type", "synthetic"},       {"gop", syn.gop_length},
                           {"packets_per_frame", syn.packets_per_frame},
                           {"ref_size_multiplier", syn.ref_size_multiplier},
                           {"fps", syn.fps},            {"video_pid", syn.video_pid},
                           {"num_frames", syn.num_frames}};
        } else if (s.source.replay_path) {
            e["source"] = {{"type", "file"}, {"path", *s.source.replay_path}};
        }
        doc["sensors"].push_back(std::move(e));
    }
    doc["processes"] = json::array();
    for (const ProcessSpec& p : processes) {
        json thresholds = json::object();
        for (const auto& [sid, thr] : p.thresholds)
            thresholds[std::to_string(sid)] = thr;
        doc["processes"].push_back({{"process_id", p.process_id},
                                    {"egress_port", p.egress_port},
                                    {"strategy", strategy_name(p.strategy)},
                                    {"thresholds", std::move(thresholds)}});
    }
    return doc;
}

qoc::DetectionTable Scenario::table() const {
    return detection_table_path ? qoc::DetectionTable::load(*detection_table_path)
                                : qoc::DetectionTable::builtin();
}

std::vector<std::string> Scenario::validate() const {
    std::vector<std::string> errs;
    if (duration_s <= 0)
        errs.push_back("duration_s must be positive");
    std::set<std::uint16_t> stream_ids;
    std::set<std::uint16_t> ingress_ports;
    for (const SensorSpec& s : sensors) {
        if (!stream_ids.insert(s.source.stream_id).second)
            errs.push_back("duplicate stream_id " +
                           std::to_string(s.source.stream_id));
        if (s.edge_ingress_port == 0)
            errs.push_back("sensor stream " + std::to_string(s.source.stream_id) +
                           " has no edge_ingress_port");
        else if (!ingress_ports.insert(s.edge_ingress_port).second)
            errs.push_back("duplicate edge_ingress_port " +
                           std::to_string(s.edge_ingress_port));
        if (s.source.synthetic && s.source.synthetic->gop_length < 1)
            errs.push_back("gop length must be >= 1");
    }
    std::set<std::pair<std::string, std::uint16_t>> egress_addrs;
    std::set<std::uint16_t> process_ids;
    for (const ProcessSpec& p : processes) {
        if (!process_ids.insert(p.process_id).second)
            errs.push_back("duplicate process_id " + std::to_string(p.process_id));
        if (!egress_addrs.insert({p.egress_host, p.egress_port}).second)
            errs.push_back("duplicate egress address " + p.egress_host + ":" +
                           std::to_string(p.egress_port));
        for (const auto& [sid, thr] : p.thresholds) {
            if (!stream_ids.contains(sid))
                errs.push_back("process " + std::to_string(p.process_id) +
                               " references unknown stream " + std::to_string(sid));
            if (thr <= 0 || thr > 1)
                errs.push_back("threshold for stream " + std::to_string(sid) +
                               " outside (0,1]");
        }
    }
    for (std::size_t i = 1; i < timeline.size(); ++i)
        if (timeline[i].at_s < timeline[i - 1].at_s)
            errs.push_back("timeline not sorted by at_s");
    try {
        table().validate();
    } catch (const std::exception& e) {
        errs.push_back(std::string("detection table: ") + e.what());
    }
    return errs;
}

qoc::RateModel derive_rate_model(const sensor::StreamSource::Synthetic& spec) {
    const double gop_seconds = spec.gop_length / spec.fps;
    const std::uint32_t ref_packets = std::max<std::uint32_t>(
        1, static_cast<std::uint32_t>(
               std::lround(spec.packets_per_frame * spec.ref_size_multiplier)));
    const double diff_packets =
        double(spec.gop_length - 1) * spec.packets_per_frame;
    const double bits = 8.0 * ts::kPacketSize;
    return {ref_packets * bits / gop_seconds, diff_packets * bits / gop_seconds};
}

namespace {

struct Solved {
    control::Reconciler::Outcome outcome;
    std::vector<edge::StreamDesc> streams;
    std::vector<std::uint16_t> process_order;  // sorted process ids
};

Solved solve(const Scenario& sc) {
    std::vector<edge::StreamDesc> streams;
    for (const SensorSpec& s : sc.sensors)
        streams.push_back({s.edge_ingress_port, s.source.stream_id,
                           {s.source.video_pid()}});
    control::Reconciler rec(streams, sc.table());
    control::Reconciler::Outcome outcome;
    for (const ProcessSpec& p : sc.processes) {
        control::SinkRegistration reg;
        reg.process_id = p.process_id;
        reg.egress_ip = runtime::resolve(p.egress_host, p.egress_port).ip;
        reg.egress_port = p.egress_port;
        reg.strategy = p.strategy;
        for (const auto& [sid, thr] : p.thresholds)
            reg.thresholds[sid] = thr;
        outcome = rec.register_sink(reg);
    }
    if (sc.processes.empty())
        outcome = rec.reconcile();
    std::vector<std::uint16_t> order;
    for (const auto& [pid, reg] : rec.registrations())
        order.push_back(pid);
    return {std::move(outcome), std::move(streams), std::move(order)};
}

qoc::RateModel rate_model_of(const SensorSpec& s) {
    if (s.rate_model)
        return *s.rate_model;
    if (s.source.synthetic)
        return derive_rate_model(*s.source.synthetic);
    return {};
}

} // namespace

CheckResult check(const Scenario& sc) {
    CheckResult result;
    result.violations = sc.validate();
    if (!result.violations.empty())
        return result;

    Solved solved;
    try {
        solved = solve(sc);
    } catch (const qoc::Infeasible& e) {
        result.violations.push_back(std::string("infeasible: ") + e.what());
        return result;
    }

    json omega = json::array();
    for (std::size_t i = 0; i < sc.sensors.size(); ++i) {
        for (std::size_t j = 0; j < solved.process_order.size(); ++j) {
            auto it = solved.outcome.delta.delta.find({i, j});
            if (it == solved.outcome.delta.delta.end())
                continue;
            omega.push_back({{"stream_id", sc.sensors[i].source.stream_id},
                             {"process_id", solved.process_order[j]},
                             {"delta", it->second}});
        }
    }
    json q_eff = json::array();
    std::vector<qoc::RateModel> models;
    std::vector<qoc::StreamQuality> effs;
    for (std::size_t i = 0; i < sc.sensors.size(); ++i) {
        bool paused =
            std::find(solved.outcome.paused_streams.begin(),
                      solved.outcome.paused_streams.end(),
                      sc.sensors[i].source.stream_id) !=
            solved.outcome.paused_streams.end();
        q_eff.push_back({{"stream_id", sc.sensors[i].source.stream_id},
                         {"keep", solved.outcome.q_eff[i].differential_keep},
                         {"paused", paused}});
        if (!paused) {
            models.push_back(rate_model_of(sc.sensors[i]));
            effs.push_back(solved.outcome.q_eff[i]);
        }
    }

    result.preview["omega"] = std::move(omega);
    result.preview["q_eff"] = std::move(q_eff);
    result.preview["policy_version"] = solved.outcome.map->version;
    result.preview["bandwidth_full_bps"] =
        qoc::bandwidth_full(models, std::max<std::size_t>(1, sc.processes.size()));
    double eff_total = 0;
    for (std::size_t i = 0; i < models.size(); ++i)
        eff_total += models[i].bitrate(effs[i]);
    result.preview["bandwidth_eff_bps"] = eff_total;
    result.preview["bandwidth_saved_bps"] = qoc::bandwidth_saved(models, effs);
    result.ok = true;
    return result;
}

json run(const Scenario& sc) {
    auto violations = sc.validate();
    if (!violations.empty()) {
        std::string all;
        for (const auto& v : violations)
            all += v + "; ";
        throw std::runtime_error("invalid scenario: " + all);
    }

    // Sensors first: their control sockets must exist before the edge
    // learns where to send QualityNotify.
    std::vector<std::unique_ptr<runtime::SensorRuntime>> sensors;
    for (const SensorSpec& s : sc.sensors) {
        runtime::SensorConfig cfg;
        cfg.source = s.source;
        cfg.edge_host = s.edge_host;
        cfg.edge_ingress_port = s.edge_ingress_port;
        cfg.control_port = s.control_port;
        if (s.source.synthetic && s.source.synthetic->num_frames == 0)
            cfg.max_frames = static_cast<std::uint64_t>(
                std::llround(sc.duration_s * s.source.fps()));
        sensors.push_back(std::make_unique<runtime::SensorRuntime>(cfg));
    }

    runtime::EdgeConfig edge_cfg;
    edge_cfg.control_port = sc.edge_control_port;
    edge_cfg.table = sc.table();
    for (std::size_t i = 0; i < sc.sensors.size(); ++i) {
        const SensorSpec& s = sc.sensors[i];
        edge_cfg.ingresses.push_back(
            {s.edge_ingress_port,
             s.source.stream_id,
             {s.source.video_pid()},
             runtime::resolve("127.0.0.1", sensors[i]->control_port())});
    }
    runtime::EdgeRuntime edge_rt(edge_cfg);

    std::map<std::uint16_t, std::size_t> stream_index;
    for (std::size_t i = 0; i < sc.sensors.size(); ++i)
        stream_index[sc.sensors[i].source.stream_id] = i;
    edge_rt.on_stream_pause = [&](edge::StreamId sid, bool paused) {
        auto it = stream_index.find(sid);
        if (it == stream_index.end())
            return;
        if (paused)
            sensors[it->second]->pause();
        else
            sensors[it->second]->resume();
    };

    std::vector<std::unique_ptr<runtime::SinkRuntime>> sinks;
    for (const ProcessSpec& p : sc.processes) {
        std::set<std::uint16_t> pids;
        for (const auto& [sid, thr] : p.thresholds)
            pids.insert(sc.sensors[stream_index.at(sid)].source.video_pid());
        sinks.push_back(std::make_unique<runtime::SinkRuntime>(
            p.egress_host, p.egress_port, pids));
    }

    edge_rt.start();
    for (auto& s : sensors)
        s->start();

    auto edge_control = runtime::resolve("127.0.0.1", sc.edge_control_port);
    for (std::size_t j = 0; j < sc.processes.size(); ++j) {
        const ProcessSpec& p = sc.processes[j];
        control::SinkRegister reg;
        reg.process_id = p.process_id;
        reg.egress_ip = 0;  // edge fills in the sender address
        reg.egress_port = p.egress_port;
        reg.strategy = p.strategy == qoc::DropStrategy::Uniform ? 0 : 1;
        for (const auto& [sid, thr] : p.thresholds)
            reg.thresholds.push_back({sid, control::to_fixed(thr)});
        if (!sinks[j]->register_with_edge(edge_control, reg))
            throw std::runtime_error("sink registration rejected for process " +
                                     std::to_string(p.process_id));
        sinks[j]->start();
    }

    // Timeline actions at their offsets, then run out the clock.
    auto start = std::chrono::steady_clock::now();
    for (const TimelineAction& a : sc.timeline) {
        std::this_thread::sleep_until(
            start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(a.at_s)));
        if (a.action == "deregister") {
            edge_rt.deregister_sink(a.params.at("process_id").get<std::uint16_t>());
        } else if (a.action == "set_threshold") {
            std::uint16_t pid = a.params.at("process_id").get<std::uint16_t>();
            auto regs = edge_rt.register_sink([&] {
                control::SinkRegistration r;
                auto pit = std::find_if(sc.processes.begin(), sc.processes.end(),
                                        [&](const auto& p) {
                                            return p.process_id == pid;
                                        });
                if (pit == sc.processes.end())
                    throw std::runtime_error("timeline references unknown process");
                r.process_id = pid;
                r.egress_ip = runtime::resolve(pit->egress_host, 0).ip;
                r.egress_port = pit->egress_port;
                r.strategy = pit->strategy;
                for (const auto& [sid, thr] : pit->thresholds)
                    r.thresholds[sid] = thr;
                r.thresholds[a.params.at("stream_id").get<std::uint16_t>()] =
                    a.params.at("value").get<double>();
                return r;
            }());
            (void)regs;
        }
    }
    std::this_thread::sleep_until(
        start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(sc.duration_s)));

    for (auto& s : sensors)
        s->stop();
    // Let in-flight datagrams drain before tearing the edge down.
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    edge_rt.stop();
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    for (auto& s : sinks)
        s->stop();

    // Assemble the report.
    auto snap = edge_rt.snapshot();
    std::vector<report::SensorSummary> sensor_summaries;
    report::Predictions predictions;
    std::vector<qoc::RateModel> models;
    std::vector<qoc::StreamQuality> effs;
    for (std::size_t i = 0; i < sc.sensors.size(); ++i) {
        report::SensorSummary ss;
        ss.stream_id = sc.sensors[i].source.stream_id;
        ss.configured_keep = sensors[i]->configured_keep();
        ss.counters = sensors[i]->counters();
        ss.duration_s = sensors[i]->active_seconds();
        qoc::RateModel model = rate_model_of(sc.sensors[i]);
        qoc::StreamQuality eff{ss.configured_keep};
        ss.predicted_bitrate_bps = model.bitrate(eff);
        if (ss.duration_s > 0) {
            models.push_back(model);
            effs.push_back(eff);
            predictions.measured_saved_bps +=
                model.bitrate(qoc::StreamQuality::full()) -
                8.0 * double(ss.counters.bytes_out()) / ss.duration_s;
        }
        sensor_summaries.push_back(std::move(ss));
    }
    predictions.bandwidth_full_bps =
        qoc::bandwidth_full(models, std::max<std::size_t>(1, sc.processes.size()));
    for (std::size_t i = 0; i < models.size(); ++i)
        predictions.bandwidth_eff_bps += models[i].bitrate(effs[i]);
    predictions.bandwidth_saved_bps = qoc::bandwidth_saved(models, effs);

    report::EdgeSummary edge_summary{snap.policy_version, snap.packets_parsed,
                                     snap.decisions_made, snap.packets_cloned,
                                     snap.orphaned};

    std::vector<report::EgressSummary> egress_summaries;
    auto final_map = edge_rt.policy();
    for (const auto& [key, counters] : snap.counters) {
        auto [stream_id, egress_id] = key;
        report::EgressSummary es;
        es.stream_id = stream_id;
        es.process_id = egress_id;
        es.configured_delta = 0;
        if (final_map)
            for (const auto& [mkey, entry] : final_map->entries)
                if (mkey.second == stream_id)
                    for (const auto& eg : entry.egresses)
                        if (eg.egress_id == egress_id)
                            es.configured_delta = eg.delta;
        es.counters = counters;
        egress_summaries.push_back(std::move(es));
    }

    json doc = report::emit_report(sc.to_json(), sensor_summaries, edge_summary,
                                   egress_summaries, metrics::CpuProxy{},
                                   predictions);
    doc["unacked_flags"] = edge_rt.unacked_flags();

    std::ofstream out(sc.report_path);
    if (!out)
        throw std::runtime_error("cannot write report: " + sc.report_path);
    out << doc.dump(2) << '\n';
    return doc;
}

} // namespace edgecast::scenario
