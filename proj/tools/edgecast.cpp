#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "edgecast/scenario.hpp"
#include "edgecast/sensor.hpp"
#include "edgecast/ts.hpp"

namespace {

bool log_enabled() {
    const char* level = std::getenv("EDGECAST_LOG");
    return level && std::string(level) != "off" && std::string(level) != "none";
}

int cmd_run(const std::string& path, const std::string& report_override,
            double duration_override, long seed_override) {
    auto sc = edgecast::scenario::Scenario::load(path);
    if (!report_override.empty())
        sc.report_path = report_override;
    if (duration_override > 0)
        sc.duration_s = duration_override;
    if (seed_override >= 0)
        sc.seed = static_cast<std::uint32_t>(seed_override);
    auto doc = edgecast::scenario::run(sc);
    if (log_enabled())
        std::cerr << "report written to " << sc.report_path << "\n";
    std::cout << sc.report_path << "\n";
    return 0;
}

int cmd_check(const std::string& path) {
    auto sc = edgecast::scenario::Scenario::load(path);
    auto result = edgecast::scenario::check(sc);
    if (!result.ok) {
        for (const auto& v : result.violations)
            std::cerr << "error: " << v << "\n";
        return 1;
    }
    std::cout << result.preview.dump(2) << "\n";
    return 0;
}

int cmd_replay_classify(const std::string& path, std::uint16_t video_pid) {
    auto packets = edgecast::sensor::load_replay(path);
    std::map<std::uint16_t, edgecast::ts::PidState> states;
    std::cout << "index,pid,pusi,continuity,class\n";
    for (std::size_t i = 0; i < packets.size(); ++i) {
        const auto& pkt = packets[i];
        auto& st = states[pkt.pid];
        if (st.last_continuity == std::nullopt && st.frame_index == 0) {
            st.pid = pkt.pid;
            st.is_video = (pkt.pid == video_pid);
        }
        auto cls = edgecast::ts::classify_packet(st, pkt);
        std::cout << i << ',' << pkt.pid << ',' << (pkt.pusi ? 1 : 0) << ','
                  << int(pkt.continuity_counter) << ','
                  << edgecast::ts::to_string(cls) << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"edgecast: content-aware TS stream suppression and fan-out"};
    app.require_subcommand(1);

    std::string scenario_path, report_path, replay_path;
    double duration = 0;
    long seed = -1;
    std::uint16_t video_pid = 0x0100;

    auto* run = app.add_subcommand("run", "run a scenario end to end");
    run->add_option("scenario", scenario_path, "scenario JSON file")->required();
    run->add_option("--report", report_path, "override report output path");
    run->add_option("--duration", duration, "override run duration (seconds)");
    run->add_option("--seed", seed, "override scenario seed");

    auto* check = app.add_subcommand("check", "validate a scenario statically");
    check->add_option("scenario", scenario_path, "scenario JSON file")->required();

    auto* replay = app.add_subcommand("replay-classify",
                                      "print per-packet class CSV for a TS file");
    replay->add_option("file", replay_path, "raw TS file (concatenated 188-byte units)")
        ->required();
    replay->add_option("--video-pid", video_pid, "PID carrying video (default 256)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return cmd_run(scenario_path, report_path, duration, seed);
        if (check->parsed())
            return cmd_check(scenario_path);
        if (replay->parsed())
            return cmd_replay_classify(replay_path, video_pid);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
