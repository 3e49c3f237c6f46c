#ifndef EDGECAST_REPORT_HPP
#define EDGECAST_REPORT_HPP

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgecast/edge.hpp"
#include "edgecast/metrics.hpp"
#include "edgecast/qoc.hpp"

namespace edgecast::report {

using nlohmann::json;

struct SensorSummary {
    std::uint16_t stream_id;
    double configured_keep;
    metrics::PathCounters counters;
    double duration_s;
    double predicted_bitrate_bps;  // RateModel S(Q_eff); 0 when no model
};

struct EdgeSummary {
    std::uint64_t policy_version;
    std::uint64_t packets_parsed;
    std::uint64_t decisions_made;
    std::uint64_t packets_cloned;
    std::uint64_t orphaned;
};

struct EgressSummary {
    std::uint16_t process_id;
    std::uint16_t stream_id;
    double configured_delta;
    metrics::PathCounters counters;
    std::optional<double> decodable_ratio;
};

struct Predictions {
    double bandwidth_full_bps = 0;
    double bandwidth_eff_bps = 0;
    double bandwidth_saved_bps = 0;
    double measured_saved_bps = 0;
};

json counters_to_json(const metrics::PathCounters& c);

/// Assemble the single-document run report.
json emit_report(const json& config, const std::vector<SensorSummary>& sensors,
                 const EdgeSummary& edge_summary,
                 const std::vector<EgressSummary>& egresses,
                 const metrics::CpuProxy& proxy, const Predictions& predictions);

/// Plot-data rows: (x, series, value) per line.
struct PlotRow {
    double x;
    std::string series;
    double value;
};

void write_plot_csv(const std::string& path, const std::vector<PlotRow>& rows);

} // namespace edgecast::report

#endif
