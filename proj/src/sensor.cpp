#include "edgecast/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace edgecast::sensor {

namespace {

constexpr std::uint16_t kPmtPid = 0x1000;

ts::TsPacket make_packet(std::uint16_t pid, bool pusi, std::uint8_t cc,
                         std::span<const std::uint8_t> payload,
                         bool random_access = false) {
    std::array<std::uint8_t, ts::kPacketSize> raw;
    raw.fill(0xFF);
    raw[0] = ts::kSyncByte;
    raw[1] = static_cast<std::uint8_t>((pusi ? 0x40 : 0x00) | ((pid >> 8) & 0x1F));
    raw[2] = static_cast<std::uint8_t>(pid & 0xFF);
    std::size_t offset = 4;
    if (random_access) {
        raw[3] = static_cast<std::uint8_t>(0x30 | (cc & 0x0F));
        raw[4] = 1;     // adaptation field length
        raw[5] = 0x40;  // random_access_indicator
        offset = 6;
    } else {
        raw[3] = static_cast<std::uint8_t>(0x10 | (cc & 0x0F));
    }
    std::copy_n(payload.begin(), std::min(payload.size(), ts::kPacketSize - offset),
                raw.begin() + offset);
    return ts::parse_ts_packet(raw);
}

std::vector<std::uint8_t> pes_header_with_nal(std::uint8_t nal_type,
                                              std::uint8_t nal_ref_idc) {
    return {
        0x00, 0x00, 0x01, 0xE0,  // PES start, video stream id
        0x00, 0x00,              // PES packet length (unbounded)
        0x80, 0x00, 0x00,        // flags, header data length 0
        0x00, 0x00, 0x01,        // NAL start code
        static_cast<std::uint8_t>((nal_ref_idc << 5) | nal_type),
    };
}

} // namespace

SyntheticStream::SyntheticStream(const StreamSource::Synthetic& spec) : spec_(spec) {}

std::vector<ts::TsPacket> SyntheticStream::psi() {
    std::vector<ts::TsPacket> out;
    // Minimal PAT: program 1 -> PMT PID
    std::vector<std::uint8_t> pat = {0x00, 0x00, 0xB0, 0x0D, 0x00, 0x01,
                                     0xC1, 0x00, 0x00, 0x00, 0x01,
                                     static_cast<std::uint8_t>(0xE0 | (kPmtPid >> 8)),
                                     static_cast<std::uint8_t>(kPmtPid & 0xFF)};
    out.push_back(make_packet(ts::kPidPat, true, next_cc(ts::kPidPat), pat));
    // Minimal PMT: one H.264 stream on the video PID
    std::uint16_t vpid = spec_.video_pid;
    std::vector<std::uint8_t> pmt = {0x00, 0x02, 0xB0, 0x12, 0x00, 0x01,
                                     0xC1, 0x00, 0x00,
                                     static_cast<std::uint8_t>(0xE0 | (vpid >> 8)),
                                     static_cast<std::uint8_t>(vpid & 0xFF),
                                     0xF0, 0x00, 0x1B,
                                     static_cast<std::uint8_t>(0xE0 | (vpid >> 8)),
                                     static_cast<std::uint8_t>(vpid & 0xFF),
                                     0xF0, 0x00};
    out.push_back(make_packet(kPmtPid, true, next_cc(kPmtPid), pmt));
    return out;
}

std::vector<ts::TsPacket> SyntheticStream::next_frame() {
    const bool is_ref = (frame_ % spec_.gop_length) == 0;
    std::uint32_t n = spec_.packets_per_frame;
    if (is_ref)
        n = std::max<std::uint32_t>(
            1, static_cast<std::uint32_t>(
                   std::lround(spec_.packets_per_frame * spec_.ref_size_multiplier)));

    std::vector<ts::TsPacket> out;
    out.reserve(n);
    auto head = pes_header_with_nal(is_ref ? 5 : 1, is_ref ? 3 : 2);
    out.push_back(make_packet(spec_.video_pid, true, next_cc(spec_.video_pid),
                              head, is_ref));
    for (std::uint32_t p = 1; p < n; ++p) {
        std::array<std::uint8_t, 16> filler;
        for (std::size_t b = 0; b < filler.size(); ++b)
            filler[b] = static_cast<std::uint8_t>(
                (spec_.seed * 2654435761u + frame_ * 31 + p * 7 + b) >> 8);
        out.push_back(make_packet(spec_.video_pid, false,
                                  next_cc(spec_.video_pid), filler));
    }
    ++frame_;
    return out;
}

std::uint8_t SyntheticStream::next_cc(std::uint16_t pid) {
    std::uint8_t cc = cc_[pid];
    cc_[pid] = (cc + 1) & 0x0F;
    return cc;
}

std::vector<ts::TsPacket> generate_synthetic(const StreamSource::Synthetic& spec) {
    SyntheticStream gen(spec);
    std::vector<ts::TsPacket> out = gen.psi();
    std::uint32_t frames = spec.num_frames ? spec.num_frames : 2 * spec.gop_length;
    for (std::uint32_t f = 0; f < frames; ++f) {
        auto frame = gen.next_frame();
        out.insert(out.end(), frame.begin(), frame.end());
    }
    return out;
}

std::vector<ts::TsPacket> load_replay(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open replay file: " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (data.empty() || data.size() % ts::kPacketSize != 0)
        throw ts::BadFraming(data.size());
    return ts::scan_datagram(data);
}

SensorPipeline::SensorPipeline(StreamSource source, SensorQuality quality)
    : source_(std::move(source)), quality_(std::move(quality)) {}

std::vector<ts::TsPacket> SensorPipeline::transmit(
    std::span<const ts::TsPacket> packets) {
    std::vector<ts::TsPacket> out;
    out.reserve(packets.size());
    const std::uint16_t vpid = source_.video_pid();
    for (const ts::TsPacket& pkt : packets) {
        auto& st = pid_states_[pkt.pid];
        if (st.last_continuity == std::nullopt && st.frame_index == 0) {
            st.pid = pkt.pid;
            st.is_video = (pkt.pid == vpid);
        }
        // Pending quality takes effect only at a frame boundary.
        if (pkt.pusi && st.is_video && quality_.pending) {
            quality_.q_eff = *quality_.pending;
            quality_.pending.reset();
        }
        ts::FrameClass cls = ts::classify_packet(st, pkt);
        counters_.packets_in[cls]++;
        // Frame-aligned suppression: the error-diffusion decision is made
        // once per differential frame at its PUSI packet and applied to the
        // whole frame, so a transmitted frame is never headless.
        if (cls == ts::FrameClass::Differential) {
            if (pkt.pusi) {
                double drop_rate = 1.0 - quality_.q_eff.differential_keep;
                quality_.accumulator += drop_rate;
                drop_current_frame_ = quality_.accumulator >= 1.0;
                if (drop_current_frame_)
                    quality_.accumulator -= 1.0;
            }
            if (drop_current_frame_) {
                counters_.policy_suppressed++;
                continue;
            }
        } else if (pkt.pusi && st.is_video) {
            drop_current_frame_ = false;
        }
        counters_.packets_out[cls]++;
        out.push_back(pkt);
    }
    counters_.continuity_gaps = 0;
    for (const auto& [pid, st] : pid_states_)
        counters_.continuity_gaps += st.continuity_gaps;
    return out;
}

void SensorPipeline::handle_quality_notify(std::uint16_t stream_id,
                                           qoc::StreamQuality q) {
    if (stream_id != source_.stream_id)
        throw UnknownStream("quality notify for stream " + std::to_string(stream_id) +
                            " not served by this sensor");
    quality_.notify(q);
}

std::vector<std::vector<std::uint8_t>> frame_datagrams(
    std::span<const ts::TsPacket> packets, std::size_t max_units) {
    std::vector<std::vector<std::uint8_t>> out;
    for (std::size_t i = 0; i < packets.size(); i += max_units) {
        std::size_t n = std::min(max_units, packets.size() - i);
        std::vector<std::uint8_t> dgram;
        dgram.reserve(n * ts::kPacketSize);
        for (std::size_t k = 0; k < n; ++k)
            dgram.insert(dgram.end(), packets[i + k].raw.begin(),
                         packets[i + k].raw.end());
        out.push_back(std::move(dgram));
    }
    return out;
}

} // namespace edgecast::sensor
