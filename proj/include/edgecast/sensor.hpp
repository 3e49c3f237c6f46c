#ifndef EDGECAST_SENSOR_HPP
#define EDGECAST_SENSOR_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "edgecast/metrics.hpp"
#include "edgecast/qoc.hpp"
#include "edgecast/ts.hpp"

namespace edgecast::sensor {

/// What a sensor streams: either a raw TS capture replayed from disk or a
/// deterministic synthetic stream.
struct StreamSource {
    std::uint16_t stream_id = 0;

    struct Synthetic {
        std::uint32_t gop_length = 12;        // frames per GOP, >= 1
        std::uint32_t packets_per_frame = 3;  // differential frame size
        double ref_size_multiplier = 1.0;     // reference frames scale by this
        double fps = 30.0;
        std::uint16_t video_pid = 0x0100;
        std::uint32_t num_frames = 0;         // 0 = unbounded (runtime-paced)
        std::uint32_t seed = 1;
    };

    std::optional<Synthetic> synthetic;
    std::optional<std::string> replay_path;  // raw concatenated 188-byte units
    double replay_fps = 30.0;
    std::uint16_t replay_video_pid = 0x0100;

    std::uint16_t video_pid() const {
        return synthetic ? synthetic->video_pid : replay_video_pid;
    }
    double fps() const { return synthetic ? synthetic->fps : replay_fps; }
};

/// Incremental synthetic generator so a runtime can pace frames without
/// materializing the whole stream. PSI first, then frames in GOP order.
class SyntheticStream {
public:
    explicit SyntheticStream(const StreamSource::Synthetic& spec);

    std::vector<ts::TsPacket> psi();
    std::vector<ts::TsPacket> next_frame();
    std::uint64_t frames_emitted() const { return frame_; }

private:
    std::uint8_t next_cc(std::uint16_t pid);

    StreamSource::Synthetic spec_;
    std::map<std::uint16_t, std::uint8_t> cc_;
    std::uint64_t frame_ = 0;
};

/// Generate a valid synthetic TS sequence: one PAT/PMT pair, then GOPs of
/// one reference frame followed by gop_length-1 differential frames, each
/// spanning packets_per_frame packets (scaled for reference frames) with
/// correct continuity counters. ts_dpi classification recovers the intended
/// class of every packet.
std::vector<ts::TsPacket> generate_synthetic(const StreamSource::Synthetic& spec);

/// Load a replay file of concatenated 188-byte units.
std::vector<ts::TsPacket> load_replay(const std::string& path);

/// Sensor-side transmission state for one stream: the last notified
/// effective quality plus the error-diffusion accumulator.
struct SensorQuality {
    std::uint16_t stream_id = 0;
    qoc::StreamQuality q_eff = qoc::StreamQuality::full();
    double accumulator = 0.0;

    // Quality notifications take effect at the next frame boundary.
    std::optional<qoc::StreamQuality> pending;

    void notify(qoc::StreamQuality q) { pending = q; }
};

struct UnknownStream : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Application-layer suppression of one stream down to its notified
/// effective quality. Reference and non-video packets always pass;
/// differential packets drop at rate 1 - differential_keep via error
/// diffusion, applied frame-aligned.
class SensorPipeline {
public:
    SensorPipeline(StreamSource source, SensorQuality quality);

    /// Filter a packet sequence, updating classification and suppression
    /// state. Returns the transmitted subsequence.
    std::vector<ts::TsPacket> transmit(std::span<const ts::TsPacket> packets);

    /// Apply a quality notification; takes effect at the next frame start.
    void handle_quality_notify(std::uint16_t stream_id, qoc::StreamQuality q);

    const SensorQuality& quality() const { return quality_; }
    const metrics::PathCounters& counters() const { return counters_; }
    const StreamSource& source() const { return source_; }

private:
    StreamSource source_;
    SensorQuality quality_;
    std::map<std::uint16_t, ts::PidState> pid_states_;
    bool drop_current_frame_ = false;
    metrics::PathCounters counters_;
};

/// Pack a packet sequence into datagram payloads of up to 7 units each.
std::vector<std::vector<std::uint8_t>> frame_datagrams(
    std::span<const ts::TsPacket> packets, std::size_t max_units = 7);

} // namespace edgecast::sensor

#endif
