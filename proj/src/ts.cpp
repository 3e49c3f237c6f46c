#include "edgecast/ts.hpp"

#include <string>

namespace edgecast::ts {

const char* to_string(FrameClass c) {
    switch (c) {
        case FrameClass::Reference: return "reference";
        case FrameClass::Differential: return "differential";
        case FrameClass::NonVideo: return "nonvideo";
        case FrameClass::Unknown: return "unknown";
    }
    return "?";
}

SyncLoss::SyncLoss(std::size_t index)
    : std::runtime_error("sync byte is not 0x47 at packet " + std::to_string(index)),
      packet_index(index) {}

BadFraming::BadFraming(std::size_t length)
    : std::runtime_error("datagram length " + std::to_string(length) +
                         " is not a positive multiple of 188") {}

TsPacket parse_ts_packet(std::span<const std::uint8_t> raw) {
    if (raw.size() != kPacketSize)
        throw Malformed("TS unit must be exactly 188 bytes");
    if (raw[0] != kSyncByte)
        throw SyncLoss(0);

    TsPacket pkt;
    std::copy(raw.begin(), raw.end(), pkt.raw.begin());
    pkt.transport_error = (raw[1] & 0x80) != 0;
    pkt.pusi = (raw[1] & 0x40) != 0;
    pkt.pid = static_cast<std::uint16_t>((raw[1] & 0x1F) << 8 | raw[2]);
    pkt.adaptation_field_control = (raw[3] >> 4) & 0x03;
    pkt.continuity_counter = raw[3] & 0x0F;

    std::uint8_t offset = 4;
    const bool has_af = pkt.adaptation_field_control & 0x02;
    const bool has_payload = pkt.adaptation_field_control & 0x01;
    if (has_af) {
        const unsigned af_len = raw[4];  // bytes after the length byte itself
        if (5 + af_len > kPacketSize)
            throw Malformed("adaptation field overruns packet");
        if (af_len > 0)
            pkt.random_access = (raw[5] & 0x40) != 0;
        offset = static_cast<std::uint8_t>(5 + af_len);
    }
    if (has_payload)
        pkt.payload_offset = offset;
    return pkt;
}

std::vector<TsPacket> scan_datagram(std::span<const std::uint8_t> payload) {
    if (payload.empty() || payload.size() % kPacketSize != 0)
        throw BadFraming(payload.size());
    const std::size_t n = payload.size() / kPacketSize;
    std::vector<TsPacket> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto unit = payload.subspan(i * kPacketSize, kPacketSize);
        if (unit[0] != kSyncByte)
            throw SyncLoss(i);
        out.push_back(parse_ts_packet(unit));
    }
    return out;
}

namespace {

// Locate the first H.264 NAL unit type in a PES payload starting at the
// packet payload. Returns -1 if no start code is found inside the unit.
int find_nal_type(std::span<const std::uint8_t> p) {
    // PES start code prefix + video stream id (0xE0..0xEF)
    if (p.size() < 9 || p[0] != 0x00 || p[1] != 0x00 || p[2] != 0x01)
        return -1;
    if (p[3] < 0xE0 || p[3] > 0xEF)
        return -1;
    // PES header: 6 fixed bytes, 2 flag bytes, header-data length at [8]
    std::size_t es_start = 9u + p[8];
    if (es_start >= p.size())
        return -1;
    auto es = p.subspan(es_start);
    for (std::size_t i = 0; i + 3 < es.size(); ++i) {
        if (es[i] == 0x00 && es[i + 1] == 0x00 && es[i + 2] == 0x01) {
            std::uint8_t b = es[i + 3];
            if ((b & 0x80) == 0)  // forbidden_zero_bit
                return b & 0x1F;
            return -1;
        }
    }
    return -1;
}

} // namespace

FrameClass classify_packet(PidState& state, const TsPacket& pkt) {
    // Continuity monitoring: gaps are counted, never affect classification.
    if (pkt.has_payload()) {
        if (state.last_continuity &&
            ((*state.last_continuity + 1) & 0x0F) != pkt.continuity_counter)
            ++state.continuity_gaps;
        state.last_continuity = pkt.continuity_counter;
    }

    if (!state.is_video) {
        state.current_class = FrameClass::NonVideo;
        return FrameClass::NonVideo;
    }

    if (!pkt.pusi)
        return state.current_class;

    ++state.frame_index;

    if (pkt.random_access && *pkt.random_access) {
        state.current_class = FrameClass::Reference;
        return state.current_class;
    }

    switch (find_nal_type(pkt.payload())) {
        case 5:  // IDR slice
        case 7:  // SPS
        case 8:  // PPS
            state.current_class = FrameClass::Reference;
            break;
        case 1:  // non-IDR slice
            state.current_class = FrameClass::Differential;
            break;
        default:
            ++state.unclassified_pusi;
            state.current_class = FrameClass::Unknown;
            break;
    }
    return state.current_class;
}

} // namespace edgecast::ts
