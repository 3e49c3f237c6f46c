#ifndef EDGECAST_TS_HPP
#define EDGECAST_TS_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace edgecast::ts {

constexpr std::size_t kPacketSize = 188;
constexpr std::uint8_t kSyncByte = 0x47;

constexpr std::uint16_t kPidPat = 0x0000;
constexpr std::uint16_t kPidNull = 0x1FFF;

/// Content class of a TS packet.
enum class FrameClass : std::uint8_t {
    Reference,     ///< IDR slice, SPS or PPS — never droppable
    Differential,  ///< non-IDR slice — droppable under suppression
    NonVideo,      ///< PSI/audio/other PIDs — never droppable
    Unknown,       ///< video PID before any classifiable PUSI packet
};

const char* to_string(FrameClass c);

struct SyncLoss : std::runtime_error {
    explicit SyncLoss(std::size_t packet_index);
    std::size_t packet_index;
};

struct Malformed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BadFraming : std::runtime_error {
    explicit BadFraming(std::size_t length);
};

/// One 188-byte transport-stream unit with the header fields decoded.
struct TsPacket {
    std::array<std::uint8_t, kPacketSize> raw{};
    bool transport_error = false;
    bool pusi = false;
    std::uint16_t pid = 0;
    std::uint8_t adaptation_field_control = 0;  // 2-bit code
    std::uint8_t continuity_counter = 0;
    std::optional<bool> random_access;          // from adaptation field, when present
    std::optional<std::uint8_t> payload_offset; // absent when AFC says no payload

    bool has_payload() const { return payload_offset.has_value(); }
    std::span<const std::uint8_t> payload() const {
        if (!payload_offset) return {};
        return std::span(raw).subspan(*payload_offset);
    }
};

/// Per-PID classification state. Non-PUSI packets inherit the class of the
/// frame they belong to, so the state carries the class assigned at the
/// last PUSI packet.
struct PidState {
    std::uint16_t pid = 0;
    bool is_video = false;
    FrameClass current_class = FrameClass::Unknown;
    std::optional<std::uint8_t> last_continuity;
    std::uint64_t frame_index = 0;      // running count of PUSI starts
    std::uint64_t continuity_gaps = 0;
    std::uint64_t unclassified_pusi = 0;
};

/// Decode the 4-byte header and, when present, the adaptation field of a
/// single 188-byte unit. Throws SyncLoss / Malformed.
TsPacket parse_ts_packet(std::span<const std::uint8_t> raw);

/// Split a datagram payload into its 188-byte units, parsing each header.
/// The payload length must be a positive multiple of 188.
std::vector<TsPacket> scan_datagram(std::span<const std::uint8_t> payload);

/// Classify one packet and update the PID state. Pure given (state, packet):
/// the same sequence always yields the same class sequence. Payload bytes
/// are inspected only on PUSI packets of video PIDs.
FrameClass classify_packet(PidState& state, const TsPacket& pkt);

} // namespace edgecast::ts

#endif
