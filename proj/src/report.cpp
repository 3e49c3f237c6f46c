#include "edgecast/report.hpp"

#include <fstream>

namespace edgecast::report {

namespace {

json class_counts_to_json(const metrics::ClassCounts& c) {
    return json{
        {"reference", c[ts::FrameClass::Reference]},
        {"differential", c[ts::FrameClass::Differential]},
        {"nonvideo", c[ts::FrameClass::NonVideo]},
        {"unknown", c[ts::FrameClass::Unknown]},
        {"total", c.total()},
    };
}

} // namespace

json counters_to_json(const metrics::PathCounters& c) {
    return json{
        {"packets_in", class_counts_to_json(c.packets_in)},
        {"packets_out", class_counts_to_json(c.packets_out)},
        {"bytes_in", c.bytes_in()},
        {"bytes_out", c.bytes_out()},
        {"policy_suppressed", c.policy_suppressed},
        {"overflow_dropped", c.overflow_dropped},
        {"orphaned", c.orphaned},
        {"unknown_class", c.unknown_class},
        {"continuity_gaps", c.continuity_gaps},
    };
}

json emit_report(const json& config, const std::vector<SensorSummary>& sensors,
                 const EdgeSummary& edge_summary,
                 const std::vector<EgressSummary>& egresses,
                 const metrics::CpuProxy& proxy, const Predictions& predictions) {
    json doc;
    doc["config"] = config;

    doc["sensors"] = json::array();
    for (const SensorSummary& s : sensors) {
        std::uint64_t diff_in =
            s.counters.packets_in[ts::FrameClass::Differential];
        double realized_keep =
            diff_in ? double(s.counters.packets_out[ts::FrameClass::Differential]) /
                          double(diff_in)
                    : 1.0;
        double measured_bps =
            s.duration_s > 0 ? 8.0 * double(s.counters.bytes_out()) / s.duration_s : 0;
        doc["sensors"].push_back({
            {"stream_id", s.stream_id},
            {"configured_keep", s.configured_keep},
            {"realized_keep", realized_keep},
            {"measured_bitrate_bps", measured_bps},
            {"predicted_bitrate_bps", s.predicted_bitrate_bps},
            {"duration_s", s.duration_s},
            {"counters", counters_to_json(s.counters)},
        });
    }

    doc["edges"] = json::array({{
        {"policy_version", edge_summary.policy_version},
        {"packets_parsed", edge_summary.packets_parsed},
        {"decisions_made", edge_summary.decisions_made},
        {"packets_cloned", edge_summary.packets_cloned},
        {"orphaned", edge_summary.orphaned},
    }});

    doc["egresses"] = json::array();
    for (const EgressSummary& e : egresses) {
        std::uint64_t diff_in =
            e.counters.packets_in[ts::FrameClass::Differential];
        double realized_delta =
            diff_in ? double(e.counters.policy_suppressed) / double(diff_in) : 0.0;
        json entry = {
            {"process_id", e.process_id},
            {"stream_id", e.stream_id},
            {"configured_delta", e.configured_delta},
            {"realized_delta", realized_delta},
            {"counters", counters_to_json(e.counters)},
        };
        if (e.decodable_ratio)
            entry["decodable_ratio"] = *e.decodable_ratio;
        doc["egresses"].push_back(std::move(entry));
    }

    doc["proxies"] = {
        {"c_parse", proxy.c_parse},
        {"c_decide", proxy.c_decide},
        {"c_clone", proxy.c_clone},
        {"total_cost", proxy.total(edge_summary.packets_parsed,
                                   edge_summary.decisions_made,
                                   edge_summary.packets_cloned)},
    };

    doc["predictions"] = {
        {"bandwidth_full_bps", predictions.bandwidth_full_bps},
        {"bandwidth_eff_bps", predictions.bandwidth_eff_bps},
        {"bandwidth_saved_bps", predictions.bandwidth_saved_bps},
        {"measured_saved_bps", predictions.measured_saved_bps},
    };
    return doc;
}

void write_plot_csv(const std::string& path, const std::vector<PlotRow>& rows) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write plot csv: " + path);
    out << "x,series,value\n";
    for (const PlotRow& r : rows)
        out << r.x << ',' << r.series << ',' << r.value << '\n';
}

} // namespace edgecast::report
