#include "edgecast/runtime.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <stdexcept>

namespace edgecast::runtime {

using namespace std::chrono;

// ---------------------------------------------------------------------------
// UdpSocket

UdpSocket::UdpSocket() {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0)
        throw std::runtime_error("socket() failed");
}

UdpSocket::~UdpSocket() {
    if (fd_ >= 0)
        ::close(fd_);
}

UdpSocket::UdpSocket(UdpSocket&& other) noexcept : fd_(other.fd_) {
    other.fd_ = -1;
}

UdpSocket& UdpSocket::operator=(UdpSocket&& other) noexcept {
    if (this != &other) {
        if (fd_ >= 0)
            ::close(fd_);
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

UdpSocket::Endpoint resolve(const std::string& host, std::uint16_t port) {
    std::string h = (host == "localhost") ? "127.0.0.1" : host;
    in_addr addr{};
    if (::inet_pton(AF_INET, h.c_str(), &addr) != 1)
        throw std::runtime_error("cannot resolve address: " + host);
    return {ntohl(addr.s_addr), port};
}

void UdpSocket::bind(const std::string& host, std::uint16_t port) {
    Endpoint ep = resolve(host, port);
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(ep.ip);
    sa.sin_port = htons(ep.port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
        throw std::runtime_error("bind failed on " + host + ":" +
                                 std::to_string(port) + ": " + std::strerror(errno));
}

std::uint16_t UdpSocket::local_port() const {
    sockaddr_in sa{};
    socklen_t len = sizeof(sa);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) != 0)
        throw std::runtime_error("getsockname failed");
    return ntohs(sa.sin_port);
}

void UdpSocket::set_recv_buffer(int bytes) {
    ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &bytes, sizeof(bytes));
}

void UdpSocket::send_to(const Endpoint& dest, std::span<const std::uint8_t> bytes) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_addr.s_addr = htonl(dest.ip);
    sa.sin_port = htons(dest.port);
    ::sendto(fd_, bytes.data(), bytes.size(), 0,
             reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
}

std::optional<std::pair<std::vector<std::uint8_t>, UdpSocket::Endpoint>>
UdpSocket::recv(int timeout_ms) {
    pollfd pfd{fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, timeout_ms);
    if (rc <= 0 || !(pfd.revents & POLLIN))
        return std::nullopt;
    std::vector<std::uint8_t> buf(65536);
    sockaddr_in sa{};
    socklen_t len = sizeof(sa);
    ssize_t n = ::recvfrom(fd_, buf.data(), buf.size(), 0,
                           reinterpret_cast<sockaddr*>(&sa), &len);
    if (n < 0)
        return std::nullopt;
    buf.resize(static_cast<std::size_t>(n));
    return std::make_pair(std::move(buf),
                          Endpoint{ntohl(sa.sin_addr.s_addr), ntohs(sa.sin_port)});
}

// ---------------------------------------------------------------------------
// BoundedQueue

bool BoundedQueue::push(std::vector<std::uint8_t> item) {
    std::lock_guard lock(mu_);
    if (closed_ || items_.size() >= capacity_)
        return false;
    items_.push_back(std::move(item));
    cv_.notify_one();
    return true;
}

std::optional<std::vector<std::uint8_t>> BoundedQueue::pop(int timeout_ms) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, milliseconds(timeout_ms),
                 [&] { return closed_ || !items_.empty(); });
    if (items_.empty())
        return std::nullopt;
    auto item = std::move(items_.front());
    items_.pop_front();
    return item;
}

void BoundedQueue::close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
}

// ---------------------------------------------------------------------------
// SensorRuntime

SensorRuntime::SensorRuntime(SensorConfig config) : config_(std::move(config)) {
    control_socket_.bind("127.0.0.1", config_.control_port);
    sensor::SensorQuality q;
    q.stream_id = config_.source.stream_id;
    pipeline_ = std::make_unique<sensor::SensorPipeline>(config_.source, q);
    if (config_.source.synthetic)
        generator_ = std::make_unique<sensor::SyntheticStream>(*config_.source.synthetic);
    else if (config_.source.replay_path)
        replay_ = sensor::load_replay(*config_.source.replay_path);
}

SensorRuntime::~SensorRuntime() { stop(); }

std::uint16_t SensorRuntime::control_port() const {
    return control_socket_.local_port();
}

void SensorRuntime::start() {
    if (running_.exchange(true))
        return;
    thread_ = std::thread(&SensorRuntime::run, this);
}

void SensorRuntime::stop() {
    if (!running_.exchange(false))
        return;
    if (thread_.joinable())
        thread_.join();
    std::lock_guard lock(mu_);
    if (transmitting_ && !paused_ && active_since_ != steady_clock::time_point{}) {
        active_accum_s_ += duration<double>(steady_clock::now() - active_since_).count();
        active_since_ = {};
    }
}

void SensorRuntime::pause() {
    std::lock_guard lock(mu_);
    if (!paused_ && transmitting_ && active_since_ != steady_clock::time_point{}) {
        active_accum_s_ += duration<double>(steady_clock::now() - active_since_).count();
        active_since_ = {};
    }
    paused_ = true;
}

void SensorRuntime::resume() {
    std::lock_guard lock(mu_);
    if (paused_ && transmitting_)
        active_since_ = steady_clock::now();
    paused_ = false;
}

metrics::PathCounters SensorRuntime::counters() const {
    std::lock_guard lock(mu_);
    return pipeline_->counters();
}

double SensorRuntime::configured_keep() const {
    std::lock_guard lock(mu_);
    return pipeline_->quality().q_eff.differential_keep;
}

double SensorRuntime::active_seconds() const {
    std::lock_guard lock(mu_);
    double s = active_accum_s_;
    if (transmitting_ && !paused_ && active_since_ != steady_clock::time_point{})
        s += duration<double>(steady_clock::now() - active_since_).count();
    return s;
}

void SensorRuntime::poll_control() {
    while (auto msg = control_socket_.recv(0)) {
        auto& [bytes, from] = *msg;
        try {
            auto decoded = control::decode(bytes);
            if (auto* notify = std::get_if<control::QualityNotify>(&decoded)) {
                {
                    std::lock_guard lock(mu_);
                    pipeline_->handle_quality_notify(notify->stream_id,
                                                     {notify->keep()});
                    if (!transmitting_) {
                        transmitting_ = true;
                        if (!paused_)
                            active_since_ = steady_clock::now();
                    }
                }
                std::uint32_t cookie =
                    (std::uint32_t(notify->stream_id) << 16) | notify->keep_fixed;
                auto ack = control::encode(control::Ack{1, cookie});
                control_socket_.send_to(from, ack);
            }
        } catch (const std::exception&) {
            // Malformed or foreign-stream control traffic is dropped.
        }
    }
}

void SensorRuntime::run() {
    const double fps = config_.source.fps();
    auto next_frame_at = steady_clock::now();
    UdpSocket::Endpoint edge =
        resolve(config_.edge_host, config_.edge_ingress_port);

    while (running_) {
        poll_control();
        if (!transmitting_ || paused_ || budget_done_) {
            std::this_thread::sleep_for(milliseconds(5));
            next_frame_at = steady_clock::now();
            continue;
        }

        std::vector<ts::TsPacket> frame;
        if (!psi_sent_) {
            psi_sent_ = true;
            if (generator_)
                frame = generator_->psi();
        } else if (generator_) {
            frame = generator_->next_frame();
        } else {
            // Replay: one frame's worth approximated as 7 units.
            std::size_t n = std::min<std::size_t>(7, replay_.size() - replay_pos_);
            frame.assign(replay_.begin() + replay_pos_,
                         replay_.begin() + replay_pos_ + n);
            replay_pos_ += n;
            if (replay_pos_ >= replay_.size())
                replay_pos_ = 0;
        }

        std::vector<ts::TsPacket> out;
        {
            std::lock_guard lock(mu_);
            out = pipeline_->transmit(frame);
        }
        for (const auto& dgram : sensor::frame_datagrams(out))
            data_socket_.send_to(edge, dgram);

        if (generator_ && generator_->frames_emitted() > 0) {
            frames_sent_ = generator_->frames_emitted();
            if (config_.max_frames && frames_sent_ >= config_.max_frames) {
                budget_done_ = true;
                std::lock_guard lock(mu_);
                if (active_since_ != steady_clock::time_point{}) {
                    active_accum_s_ +=
                        duration<double>(steady_clock::now() - active_since_).count();
                    active_since_ = {};
                }
                continue;
            }
        }

        if (fps > 0) {
            next_frame_at += duration_cast<steady_clock::duration>(
                duration<double>(1.0 / fps));
            std::this_thread::sleep_until(next_frame_at);
        }
    }
}

// ---------------------------------------------------------------------------
// EdgeRuntime

EdgeRuntime::EdgeRuntime(EdgeConfig config) : config_(std::move(config)) {
    control_socket_.bind(config_.host, config_.control_port);
    std::vector<edge::StreamDesc> streams;
    for (const EdgeIngress& ing : config_.ingresses) {
        UdpSocket sock;
        sock.bind(config_.host, ing.port);
        sock.set_recv_buffer(8 * 1024 * 1024);
        ingress_sockets_.push_back(std::move(sock));
        streams.push_back({ing.port, ing.stream_id, ing.video_pids});
    }
    reconciler_ = std::make_unique<control::Reconciler>(std::move(streams),
                                                        config_.table);
    auto emit = [this](edge::EgressId egress, std::span<const std::uint8_t> bytes) {
        std::lock_guard lock(lanes_mu_);
        auto it = lanes_.find(egress);
        if (it == lanes_.end())
            return false;
        return it->second.queue->push(
            std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    };
    pipeline_ = std::make_unique<edge::EdgePipeline>(nullptr, emit);
}

EdgeRuntime::~EdgeRuntime() { stop(); }

void EdgeRuntime::start() {
    if (running_.exchange(true))
        return;
    data_thread_ = std::thread(&EdgeRuntime::data_loop, this);
    control_thread_ = std::thread(&EdgeRuntime::control_loop, this);
}

void EdgeRuntime::stop() {
    if (!running_.exchange(false))
        return;
    if (data_thread_.joinable())
        data_thread_.join();
    if (control_thread_.joinable())
        control_thread_.join();
    {
        std::lock_guard lock(pipeline_mu_);
        pipeline_->flush();
    }
    std::vector<std::thread> writers;
    {
        std::lock_guard lock(lanes_mu_);
        for (auto& [id, lane] : lanes_) {
            lane.queue->close();
            if (lane.writer.joinable())
                writers.push_back(std::move(lane.writer));
        }
    }
    for (std::thread& t : writers)
        t.join();
}

void EdgeRuntime::data_loop() {
    std::vector<pollfd> pfds;
    for (const UdpSocket& s : ingress_sockets_)
        pfds.push_back({s.fd(), POLLIN, 0});
    auto last_flush = steady_clock::now();

    std::vector<std::uint8_t> buf(65536);
    while (running_) {
        int rc = ::poll(pfds.data(), pfds.size(), 2);
        if (rc > 0) {
            for (std::size_t i = 0; i < pfds.size(); ++i) {
                if (!(pfds[i].revents & POLLIN))
                    continue;
                for (;;) {
                    ssize_t n = ::recv(ingress_sockets_[i].fd(), buf.data(),
                                       buf.size(), MSG_DONTWAIT);
                    if (n <= 0)
                        break;
                    try {
                        std::lock_guard lock(pipeline_mu_);
                        pipeline_->ingest_datagram(
                            config_.ingresses[i].port, config_.ingresses[i].stream_id,
                            std::span(buf.data(), static_cast<std::size_t>(n)));
                    } catch (const std::exception&) {
                        // Unframed or desynced datagrams are dropped whole.
                    }
                }
            }
        }
        auto now = steady_clock::now();
        if (now - last_flush >= milliseconds(5)) {
            std::lock_guard lock(pipeline_mu_);
            pipeline_->flush();
            last_flush = now;
        }
    }
}

bool EdgeRuntime::send_with_ack(UdpSocket& sock, const UdpSocket::Endpoint& dest,
                                const control::ControlMessage& msg,
                                std::uint8_t expect_acked_type) {
    auto bytes = control::encode(msg);
    for (int attempt = 0; attempt < config_.ack_attempts; ++attempt) {
        sock.send_to(dest, bytes);
        auto deadline = steady_clock::now() + milliseconds(config_.ack_timeout_ms);
        while (steady_clock::now() < deadline) {
            int remain = int(duration_cast<milliseconds>(deadline - steady_clock::now())
                                 .count());
            auto reply = sock.recv(std::max(1, remain));
            if (!reply)
                break;
            try {
                auto decoded = control::decode(reply->first);
                if (auto* ack = std::get_if<control::Ack>(&decoded))
                    if (ack->acked_type == expect_acked_type)
                        return true;
            } catch (const std::exception&) {
            }
        }
    }
    ++unacked_flags_;
    return false;
}

void EdgeRuntime::apply_outcome(const control::Reconciler::Outcome& outcome) {
    // Lanes for every registered egress, before the policy goes live.
    {
        std::lock_guard lock(lanes_mu_);
        for (const auto& [pid, reg] : reconciler_->registrations()) {
            edge::EgressId egress = reg.process_id;
            if (lanes_.contains(egress))
                continue;
            EgressLane lane;
            lane.queue = std::make_unique<BoundedQueue>(config_.egress_queue_capacity);
            lane.dest = {reg.egress_ip, reg.egress_port};
            lanes_[egress] = std::move(lane);
            EgressLane& stored = lanes_[egress];
            stored.writer = std::thread([this, egress] {
                UdpSocket out;
                for (;;) {
                    BoundedQueue* q;
                    UdpSocket::Endpoint dest;
                    {
                        std::lock_guard lk(lanes_mu_);
                        auto it = lanes_.find(egress);
                        if (it == lanes_.end())
                            return;
                        q = it->second.queue.get();
                        dest = it->second.dest;
                    }
                    auto item = q->pop(50);
                    if (!item) {
                        if (!running_)
                            return;
                        continue;
                    }
                    out.send_to(dest, *item);
                }
            });
        }
    }

    {
        std::lock_guard lock(pipeline_mu_);
        pipeline_->set_policy(outcome.map);
    }

    // Notify sensors whose effective quality changed.
    for (const control::QualityNotify& n : outcome.notifications) {
        for (const EdgeIngress& ing : config_.ingresses)
            if (ing.stream_id == n.stream_id && ing.sensor_control.port != 0)
                send_with_ack(notify_socket_, ing.sensor_control, n, 1);
    }

    // Tell live sinks about the committed map version.
    for (const auto& [pid, reg] : reconciler_->registrations()) {
        for (const auto& [key, entry] : outcome.map->entries) {
            control::PolicyUpdate update{key.second, {}};
            for (const edge::EgressPolicy& eg : entry.egresses)
                update.egresses.push_back({eg.egress_id, control::to_fixed(eg.delta)});
            bool targets_sink = false;
            for (const auto& eg : entry.egresses)
                if (eg.egress_id == reg.process_id)
                    targets_sink = true;
            if (targets_sink)
                send_with_ack(notify_socket_, {reg.egress_ip, reg.egress_port},
                              update, 2);
        }
    }

    if (on_stream_pause) {
        std::set<edge::StreamId> paused(outcome.paused_streams.begin(),
                                        outcome.paused_streams.end());
        for (edge::StreamId sid : paused)
            if (!prev_paused_.contains(sid))
                on_stream_pause(sid, true);
        for (edge::StreamId sid : prev_paused_)
            if (!paused.contains(sid))
                on_stream_pause(sid, false);
        prev_paused_ = paused;
    }
}

control::Reconciler::Outcome EdgeRuntime::register_sink(
    const control::SinkRegistration& reg) {
    std::lock_guard lock(reconciler_mu_);
    auto outcome = reconciler_->register_sink(reg);
    apply_outcome(outcome);
    return outcome;
}

control::Reconciler::Outcome EdgeRuntime::deregister_sink(std::uint16_t process_id) {
    std::lock_guard lock(reconciler_mu_);
    auto outcome = reconciler_->deregister_sink(process_id);
    apply_outcome(outcome);
    return outcome;
}

void EdgeRuntime::control_loop() {
    while (running_) {
        auto msg = control_socket_.recv(20);
        if (!msg)
            continue;
        auto& [bytes, from] = *msg;
        try {
            auto decoded = control::decode(bytes);
            if (auto* reg = std::get_if<control::SinkRegister>(&decoded)) {
                control::SinkRegistration registration;
                registration.process_id = reg->process_id;
                registration.egress_ip = reg->egress_ip ? reg->egress_ip : from.ip;
                registration.egress_port = reg->egress_port;
                registration.strategy = reg->strategy == 0
                                            ? qoc::DropStrategy::Uniform
                                            : qoc::DropStrategy::Differential;
                for (const auto& t : reg->thresholds)
                    registration.thresholds[t.stream_id] =
                        control::from_fixed(t.threshold_fixed);
                try {
                    std::lock_guard lock(reconciler_mu_);
                    auto outcome = reconciler_->register_sink(registration);
                    // Ack before the policy goes live; the sink's socket is
                    // already bound, so nothing sent next can be lost.
                    control_socket_.send_to(
                        from, control::encode(control::Ack{3, reg->process_id}));
                    apply_outcome(outcome);
                } catch (const qoc::Infeasible&) {
                    control_socket_.send_to(
                        from, control::encode(control::Ack{3, 0xFFFFFFFFu}));
                }
            }
        } catch (const std::exception&) {
            // Undecodable control datagrams are ignored.
        }
    }
}

edge::PolicySnapshot EdgeRuntime::policy() const {
    std::lock_guard lock(pipeline_mu_);
    return pipeline_->policy();
}

std::uint64_t EdgeRuntime::policy_version() const {
    std::lock_guard lock(pipeline_mu_);
    auto map = pipeline_->policy();
    return map ? map->version : 0;
}

std::uint64_t EdgeRuntime::overflow_drops() const {
    auto snap = snapshot();
    std::uint64_t total = 0;
    for (const auto& [key, c] : snap.counters)
        total += c.overflow_dropped;
    return total;
}

EdgeRuntime::Snapshot EdgeRuntime::snapshot() const {
    std::lock_guard lock(pipeline_mu_);
    Snapshot snap;
    snap.counters = pipeline_->counters();
    snap.packets_parsed = pipeline_->packets_parsed();
    snap.decisions_made = pipeline_->decisions_made();
    snap.packets_cloned = pipeline_->packets_cloned();
    snap.orphaned = pipeline_->orphaned();
    auto map = pipeline_->policy();
    snap.policy_version = map ? map->version : 0;
    return snap;
}

// ---------------------------------------------------------------------------
// SinkRuntime

SinkRuntime::SinkRuntime(std::string host, std::uint16_t port,
                         std::set<std::uint16_t> video_pids)
    : video_pids_(std::move(video_pids)) {
    socket_.bind(host, port);
    socket_.set_recv_buffer(8 * 1024 * 1024);
}

SinkRuntime::~SinkRuntime() { stop(); }

std::uint16_t SinkRuntime::port() const { return socket_.local_port(); }

bool SinkRuntime::register_with_edge(const UdpSocket::Endpoint& edge_control,
                                     const control::SinkRegister& reg,
                                     int timeout_ms, int attempts) {
    auto bytes = control::encode(control::ControlMessage(reg));
    for (int attempt = 0; attempt < attempts; ++attempt) {
        socket_.send_to(edge_control, bytes);
        auto deadline = steady_clock::now() + milliseconds(timeout_ms);
        while (steady_clock::now() < deadline) {
            auto reply = socket_.recv(10);
            if (!reply)
                continue;
            try {
                auto decoded = control::decode(reply->first);
                if (auto* ack = std::get_if<control::Ack>(&decoded))
                    if (ack->acked_type == 3)
                        return ack->cookie != 0xFFFFFFFFu;
            } catch (const std::exception&) {
            }
        }
    }
    return false;
}

void SinkRuntime::start() {
    if (running_.exchange(true))
        return;
    thread_ = std::thread(&SinkRuntime::run, this);
}

void SinkRuntime::stop() {
    if (!running_.exchange(false))
        return;
    if (thread_.joinable())
        thread_.join();
}

metrics::PathCounters SinkRuntime::counters() const {
    std::lock_guard lock(mu_);
    return counters_;
}

std::vector<std::uint8_t> SinkRuntime::received_bytes() const {
    std::lock_guard lock(mu_);
    return captured_;
}

void SinkRuntime::run() {
    while (running_) {
        auto msg = socket_.recv(20);
        if (!msg)
            continue;
        auto& [bytes, from] = *msg;
        if (!bytes.empty() && bytes.size() % ts::kPacketSize == 0 &&
            bytes[0] == ts::kSyncByte) {
            ++datagrams_;
            std::lock_guard lock(mu_);
            try {
                for (const ts::TsPacket& pkt : ts::scan_datagram(bytes)) {
                    auto& st = pid_states_[pkt.pid];
                    if (st.last_continuity == std::nullopt && st.frame_index == 0) {
                        st.pid = pkt.pid;
                        st.is_video = video_pids_.contains(pkt.pid);
                    }
                    ts::FrameClass cls = ts::classify_packet(st, pkt);
                    counters_.packets_in[cls]++;
                }
                if (capture_)
                    captured_.insert(captured_.end(), bytes.begin(), bytes.end());
            } catch (const std::exception&) {
            }
            continue;
        }
        try {
            auto decoded = control::decode(bytes);
            if (auto* update = std::get_if<control::PolicyUpdate>(&decoded))
                socket_.send_to(from,
                                control::encode(control::Ack{2, update->stream_id}));
        } catch (const std::exception&) {
        }
    }
}

} // namespace edgecast::runtime
