#ifndef EDGECAST_SCENARIO_HPP
#define EDGECAST_SCENARIO_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgecast/qoc.hpp"
#include "edgecast/sensor.hpp"

namespace edgecast::scenario {

using nlohmann::json;

struct SensorSpec {
    sensor::StreamSource source;
    std::string edge_host = "127.0.0.1";
    std::uint16_t edge_ingress_port = 0;
    std::uint16_t control_port = 0;  // 0 = ephemeral
    std::optional<qoc::RateModel> rate_model;  // derived from source when absent
};

struct ProcessSpec {
    std::uint16_t process_id = 0;
    std::string egress_host = "127.0.0.1";
    std::uint16_t egress_port = 0;
    qoc::DropStrategy strategy = qoc::DropStrategy::Differential;
    std::map<std::uint16_t, double> thresholds;  // stream id -> delta_j
};

struct TimelineAction {
    double at_s = 0;
    std::string action;  // set_threshold | register | deregister
    json params;
};

struct Scenario {
    double duration_s = 10;
    std::uint32_t seed = 1;
    std::string report_path = "report.json";
    std::optional<std::string> detection_table_path;
    std::uint16_t edge_control_port = 9900;
    std::vector<SensorSpec> sensors;
    std::vector<ProcessSpec> processes;
    std::vector<TimelineAction> timeline;

    static Scenario parse(const json& doc);
    static Scenario load(const std::string& path);
    json to_json() const;

    qoc::DetectionTable table() const;
    /// All schema/consistency violations; empty when valid.
    std::vector<std::string> validate() const;
};

/// Derive the affine bandwidth model of a synthetic source from its GOP
/// structure and frame rate.
qoc::RateModel derive_rate_model(const sensor::StreamSource::Synthetic& spec);

/// Static validation and policy preview: computed omega, Q_eff, delta and
/// predicted bandwidths, with no traffic.
struct CheckResult {
    bool ok = false;
    std::vector<std::string> violations;
    json preview;  // omega/q_eff/delta/bandwidth tables
};

CheckResult check(const Scenario& sc);

/// Execute the full loop for the configured duration and write the report.
/// Returns the report document.
json run(const Scenario& sc);

} // namespace edgecast::scenario

#endif
