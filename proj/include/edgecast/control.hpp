#ifndef EDGECAST_CONTROL_HPP
#define EDGECAST_CONTROL_HPP

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "edgecast/edge.hpp"
#include "edgecast/qoc.hpp"

namespace edgecast::control {

constexpr std::uint8_t kMagic0 = 0x45;  // 'E'
constexpr std::uint8_t kMagic1 = 0x43;  // 'C'
constexpr std::uint8_t kVersion = 1;

enum class MessageType : std::uint8_t {
    QualityNotify = 1,
    PolicyUpdate = 2,
    SinkRegister = 3,
    Ack = 4,
};

struct BadMagic : std::runtime_error {
    BadMagic() : std::runtime_error("bad control message magic") {}
};
struct BadVersion : std::runtime_error {
    BadVersion() : std::runtime_error("unsupported control message version") {}
};
struct Truncated : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownType : std::runtime_error {
    explicit UnknownType(unsigned t)
        : std::runtime_error("unknown control message type " + std::to_string(t)) {}
};

/// Fractions travel as 16-bit fixed point, value/65535.
std::uint16_t to_fixed(double fraction);
double from_fixed(std::uint16_t value);

struct QualityNotify {
    std::uint16_t stream_id;
    std::uint16_t keep_fixed;  // differential_keep * 65535

    double keep() const { return from_fixed(keep_fixed); }
    friend bool operator==(const QualityNotify&, const QualityNotify&) = default;
};

struct PolicyUpdate {
    std::uint16_t stream_id;
    struct Egress {
        std::uint16_t egress_id;
        std::uint16_t delta_fixed;
        friend bool operator==(const Egress&, const Egress&) = default;
    };
    std::vector<Egress> egresses;
    friend bool operator==(const PolicyUpdate&, const PolicyUpdate&) = default;
};

struct SinkRegister {
    std::uint16_t process_id;
    std::uint32_t egress_ip;    // IPv4, little-endian on the wire
    std::uint16_t egress_port;
    std::uint8_t strategy;      // 0 = uniform, 1 = differential
    struct Threshold {
        std::uint16_t stream_id;
        std::uint16_t threshold_fixed;  // detection threshold * 65535
        friend bool operator==(const Threshold&, const Threshold&) = default;
    };
    std::vector<Threshold> thresholds;
    friend bool operator==(const SinkRegister&, const SinkRegister&) = default;
};

struct Ack {
    std::uint8_t acked_type;
    std::uint32_t cookie;  // policy map version or notify sequence
    friend bool operator==(const Ack&, const Ack&) = default;
};

using ControlMessage = std::variant<QualityNotify, PolicyUpdate, SinkRegister, Ack>;

/// Bit-exact little-endian encoding; decode(encode(m)) == m.
std::vector<std::uint8_t> encode(const ControlMessage& msg);

/// Strict decoder: trailing bytes are rejected, not ignored.
ControlMessage decode(std::span<const std::uint8_t> bytes);

/// A registered computation sink: where its clones go and what detection
/// thresholds it demands per stream.
struct SinkRegistration {
    std::uint16_t process_id;
    std::uint32_t egress_ip;
    std::uint16_t egress_port;
    qoc::DropStrategy strategy;
    std::map<edge::StreamId, double> thresholds;  // stream id -> delta_j
};

/// Centralized single-writer reconciliation: registrations in, one policy
/// map version plus sensor notifications out.
class Reconciler {
public:
    Reconciler(std::vector<edge::StreamDesc> streams, qoc::DetectionTable table);

    struct Outcome {
        edge::PolicySnapshot map;
        std::vector<QualityNotify> notifications;  // only changed sensors
        std::vector<qoc::StreamQuality> q_eff;     // per stream index
        qoc::SuppressionMatrix delta;
        std::vector<edge::StreamId> paused_streams;  // no consumer left
    };

    /// Register (or replace) a sink and recompute. Infeasible thresholds
    /// reject the registration and leave state untouched.
    Outcome register_sink(const SinkRegistration& reg);
    Outcome deregister_sink(std::uint16_t process_id);
    Outcome reconcile();

    const std::map<std::uint16_t, SinkRegistration>& registrations() const {
        return registrations_;
    }
    edge::PolicySnapshot current_map() const { return map_; }
    const std::vector<edge::StreamDesc>& streams() const { return streams_; }

private:
    std::vector<edge::StreamDesc> streams_;
    qoc::DetectionTable table_;
    std::map<std::uint16_t, SinkRegistration> registrations_;
    std::map<edge::StreamId, double> last_notified_;  // keep per stream id
    edge::PolicySnapshot map_;
};

} // namespace edgecast::control

#endif
