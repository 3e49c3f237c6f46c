#include "edgecast/control.hpp"

#include <algorithm>
#include <cmath>

namespace edgecast::control {

std::uint16_t to_fixed(double fraction) {
    double clamped = std::clamp(fraction, 0.0, 1.0);
    return static_cast<std::uint16_t>(std::lround(clamped * 65535.0));
}

double from_fixed(std::uint16_t value) { return value / 65535.0; }

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i)
        v = (v << 8) | b[at + i];
    return v;
}

} // namespace

std::vector<std::uint8_t> encode(const ControlMessage& msg) {
    std::vector<std::uint8_t> out = {kMagic0, kMagic1, kVersion, 0};
    std::visit(
        [&](const auto& m) {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, QualityNotify>) {
                out[3] = static_cast<std::uint8_t>(MessageType::QualityNotify);
                put_u16(out, m.stream_id);
                put_u16(out, m.keep_fixed);
            } else if constexpr (std::is_same_v<T, PolicyUpdate>) {
                out[3] = static_cast<std::uint8_t>(MessageType::PolicyUpdate);
                put_u16(out, m.stream_id);
                out.push_back(static_cast<std::uint8_t>(m.egresses.size()));
                for (const auto& e : m.egresses) {
                    put_u16(out, e.egress_id);
                    put_u16(out, e.delta_fixed);
                }
            } else if constexpr (std::is_same_v<T, SinkRegister>) {
                out[3] = static_cast<std::uint8_t>(MessageType::SinkRegister);
                put_u16(out, m.process_id);
                put_u32(out, m.egress_ip);
                put_u16(out, m.egress_port);
                out.push_back(m.strategy);
                out.push_back(static_cast<std::uint8_t>(m.thresholds.size()));
                for (const auto& t : m.thresholds) {
                    put_u16(out, t.stream_id);
                    put_u16(out, t.threshold_fixed);
                }
            } else if constexpr (std::is_same_v<T, Ack>) {
                out[3] = static_cast<std::uint8_t>(MessageType::Ack);
                out.push_back(m.acked_type);
                put_u32(out, m.cookie);
            }
        },
        msg);
    return out;
}

ControlMessage decode(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4)
        throw Truncated("control message shorter than header");
    if (bytes[0] != kMagic0 || bytes[1] != kMagic1)
        throw BadMagic();
    if (bytes[2] != kVersion)
        throw BadVersion();

    auto expect_size = [&](std::size_t want) {
        if (bytes.size() < want)
            throw Truncated("control message body truncated");
        if (bytes.size() > want)
            throw Truncated("trailing bytes after control message");
    };

    switch (bytes[3]) {
        case 1: {
            expect_size(8);
            return QualityNotify{get_u16(bytes, 4), get_u16(bytes, 6)};
        }
        case 2: {
            if (bytes.size() < 7)
                throw Truncated("control message body truncated");
            std::uint8_t count = bytes[6];
            expect_size(7u + 4u * count);
            PolicyUpdate m{get_u16(bytes, 4), {}};
            for (std::size_t i = 0; i < count; ++i)
                m.egresses.push_back(
                    {get_u16(bytes, 7 + 4 * i), get_u16(bytes, 9 + 4 * i)});
            return m;
        }
        case 3: {
            if (bytes.size() < 14)
                throw Truncated("control message body truncated");
            std::uint8_t count = bytes[13];
            expect_size(14u + 4u * count);
            SinkRegister m{get_u16(bytes, 4), get_u32(bytes, 6), get_u16(bytes, 10),
                           bytes[12], {}};
            for (std::size_t i = 0; i < count; ++i)
                m.thresholds.push_back(
                    {get_u16(bytes, 14 + 4 * i), get_u16(bytes, 16 + 4 * i)});
            return m;
        }
        case 4: {
            expect_size(9);
            return Ack{bytes[4], get_u32(bytes, 5)};
        }
        default:
            throw UnknownType(bytes[3]);
    }
}

Reconciler::Reconciler(std::vector<edge::StreamDesc> streams,
                       qoc::DetectionTable table)
    : streams_(std::move(streams)), table_(std::move(table)) {}

Reconciler::Outcome Reconciler::reconcile() {
    // Stable process ordering: registrations sorted by process id.
    std::vector<const SinkRegistration*> procs;
    procs.reserve(registrations_.size());
    for (const auto& [id, reg] : registrations_)
        procs.push_back(&reg);

    std::map<std::pair<std::size_t, std::size_t>, qoc::QocRequirement> thresholds;
    std::vector<edge::EgressId> egress_of_process;
    for (std::size_t j = 0; j < procs.size(); ++j) {
        egress_of_process.push_back(procs[j]->process_id);
        for (const auto& [stream_id, threshold] : procs[j]->thresholds) {
            auto it = std::find_if(streams_.begin(), streams_.end(),
                                   [&](const auto& s) { return s.id == stream_id; });
            if (it == streams_.end())
                continue;
            std::size_t i = static_cast<std::size_t>(it - streams_.begin());
            thresholds[{i, j}] = {threshold, procs[j]->strategy};
        }
    }

    auto result = edge::edge_control(map_, streams_, egress_of_process,
                                     thresholds, table_);
    Outcome outcome;
    outcome.map = result.map;
    outcome.q_eff = result.q_eff;
    outcome.delta = std::move(result.delta);

    for (std::size_t i = 0; i < streams_.size(); ++i) {
        bool used = false;
        for (std::size_t j = 0; j < procs.size(); ++j)
            if (thresholds.contains({i, j}))
                used = true;
        edge::StreamId sid = streams_[i].id;
        if (!used) {
            outcome.paused_streams.push_back(sid);
            last_notified_.erase(sid);
            continue;
        }
        double keep = outcome.q_eff[i].differential_keep;
        auto it = last_notified_.find(sid);
        if (it == last_notified_.end() || it->second != keep) {
            outcome.notifications.push_back({sid, to_fixed(keep)});
            last_notified_[sid] = keep;
        }
    }

    map_ = outcome.map;
    return outcome;
}

Reconciler::Outcome Reconciler::register_sink(const SinkRegistration& reg) {
    auto saved = registrations_;
    registrations_[reg.process_id] = reg;
    try {
        return reconcile();
    } catch (const qoc::Infeasible&) {
        registrations_ = std::move(saved);
        throw;
    }
}

Reconciler::Outcome Reconciler::deregister_sink(std::uint16_t process_id) {
    registrations_.erase(process_id);
    return reconcile();
}

} // namespace edgecast::control
