#ifndef EDGECAST_RUNTIME_HPP
#define EDGECAST_RUNTIME_HPP

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "edgecast/control.hpp"
#include "edgecast/edge.hpp"
#include "edgecast/sensor.hpp"

namespace edgecast::runtime {

/// Thin RAII wrapper around a UDP socket.
class UdpSocket {
public:
    UdpSocket();
    ~UdpSocket();
    UdpSocket(UdpSocket&& other) noexcept;
    UdpSocket& operator=(UdpSocket&& other) noexcept;
    UdpSocket(const UdpSocket&) = delete;
    UdpSocket& operator=(const UdpSocket&) = delete;

    void bind(const std::string& host, std::uint16_t port);
    std::uint16_t local_port() const;
    void set_recv_buffer(int bytes);

    struct Endpoint {
        std::uint32_t ip = 0;  // host byte order
        std::uint16_t port = 0;
        friend bool operator==(const Endpoint&, const Endpoint&) = default;
    };

    void send_to(const Endpoint& dest, std::span<const std::uint8_t> bytes);
    /// Blocking receive with timeout; returns nullopt on timeout.
    std::optional<std::pair<std::vector<std::uint8_t>, Endpoint>> recv(
        int timeout_ms);

    int fd() const { return fd_; }

private:
    int fd_ = -1;
};

UdpSocket::Endpoint resolve(const std::string& host, std::uint16_t port);

/// Bounded queue feeding an egress writer thread. push() never blocks the
/// data path; a full queue reports backpressure instead.
class BoundedQueue {
public:
    explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

    bool push(std::vector<std::uint8_t> item);
    std::optional<std::vector<std::uint8_t>> pop(int timeout_ms);
    void close();

private:
    std::size_t capacity_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::vector<std::uint8_t>> items_;
    bool closed_ = false;
};

struct SensorConfig {
    sensor::StreamSource source;
    std::string edge_host = "127.0.0.1";
    std::uint16_t edge_ingress_port = 0;
    std::uint16_t control_port = 0;  // where QualityNotify arrives
    std::uint64_t max_frames = 0;    // 0 = until stopped
};

/// One transmitter per stream. Transmission starts on the first
/// QualityNotify and can be paused by the edge-side orchestration.
class SensorRuntime {
public:
    explicit SensorRuntime(SensorConfig config);
    ~SensorRuntime();

    void start();
    void stop();
    void pause();
    void resume();

    std::uint16_t control_port() const;
    metrics::PathCounters counters() const;
    double configured_keep() const;
    double active_seconds() const;

private:
    void run();
    void poll_control();

    SensorConfig config_;
    UdpSocket data_socket_;
    UdpSocket control_socket_;
    std::unique_ptr<sensor::SensorPipeline> pipeline_;
    std::unique_ptr<sensor::SyntheticStream> generator_;
    std::vector<ts::TsPacket> replay_;
    std::size_t replay_pos_ = 0;
    bool psi_sent_ = false;

    std::thread thread_;
    std::atomic<bool> running_{false};
    std::atomic<bool> transmitting_{false};
    std::atomic<bool> paused_{false};
    std::atomic<bool> budget_done_{false};
    std::uint64_t frames_sent_ = 0;
    mutable std::mutex mu_;
    std::chrono::steady_clock::time_point active_since_{};
    double active_accum_s_ = 0;
};

struct EdgeIngress {
    std::uint16_t port;        // UDP port to bind
    edge::StreamId stream_id;
    std::set<std::uint16_t> video_pids;
    UdpSocket::Endpoint sensor_control;  // where QualityNotify goes
};

struct EdgeConfig {
    std::string host = "127.0.0.1";
    std::uint16_t control_port = 9900;
    std::vector<EdgeIngress> ingresses;
    qoc::DetectionTable table = qoc::DetectionTable::builtin();
    std::size_t egress_queue_capacity = 4096;
    int ack_timeout_ms = 500;
    int ack_attempts = 3;
};

/// The edge: data plane threads (ingress poll + one writer per egress) and
/// the serialized control loop (registration, reconcile, notify).
class EdgeRuntime {
public:
    explicit EdgeRuntime(EdgeConfig config);
    ~EdgeRuntime();

    void start();
    void stop();

    /// Register a sink directly (same path the control socket uses).
    control::Reconciler::Outcome register_sink(const control::SinkRegistration& reg);
    control::Reconciler::Outcome deregister_sink(std::uint16_t process_id);

    std::uint64_t policy_version() const;
    edge::PolicySnapshot policy() const;
    std::uint64_t unacked_flags() const { return unacked_flags_.load(); }
    std::uint64_t overflow_drops() const;

    /// Called with stream ids that lost their last consumer.
    std::function<void(edge::StreamId, bool paused)> on_stream_pause;

    /// Aggregated data-plane state (thread-safe snapshot).
    struct Snapshot {
        std::map<std::pair<edge::StreamId, edge::EgressId>, metrics::PathCounters>
            counters;
        std::uint64_t packets_parsed;
        std::uint64_t decisions_made;
        std::uint64_t packets_cloned;
        std::uint64_t orphaned;
        std::uint64_t policy_version;
    };
    Snapshot snapshot() const;

private:
    void data_loop();
    void control_loop();
    void apply_outcome(const control::Reconciler::Outcome& outcome);
    bool send_with_ack(UdpSocket& sock, const UdpSocket::Endpoint& dest,
                       const control::ControlMessage& msg,
                       std::uint8_t expect_acked_type);

    EdgeConfig config_;
    std::vector<UdpSocket> ingress_sockets_;
    UdpSocket control_socket_;
    UdpSocket notify_socket_;

    mutable std::mutex pipeline_mu_;
    std::unique_ptr<edge::EdgePipeline> pipeline_;

    mutable std::mutex reconciler_mu_;
    std::unique_ptr<control::Reconciler> reconciler_;

    struct EgressLane {
        std::unique_ptr<BoundedQueue> queue;
        UdpSocket::Endpoint dest;
        std::thread writer;
        std::uint64_t sent = 0;
    };
    std::map<edge::EgressId, EgressLane> lanes_;
    std::mutex lanes_mu_;

    std::thread data_thread_;
    std::thread control_thread_;
    std::atomic<bool> running_{false};
    std::atomic<std::uint64_t> unacked_flags_{0};
    std::set<edge::StreamId> prev_paused_;
};

/// A computation sink: binds its egress port, counts what arrives.
class SinkRuntime {
public:
    SinkRuntime(std::string host, std::uint16_t port,
                std::set<std::uint16_t> video_pids);
    ~SinkRuntime();

    void start();
    void stop();

    /// Send SinkRegister to the edge control port; waits for the Ack.
    bool register_with_edge(const UdpSocket::Endpoint& edge_control,
                            const control::SinkRegister& reg, int timeout_ms = 500,
                            int attempts = 3);

    metrics::PathCounters counters() const;
    std::uint64_t datagrams() const { return datagrams_.load(); }
    std::vector<std::uint8_t> received_bytes() const;  // raw TS byte stream
    void set_capture(bool on) { capture_ = on; }

    std::uint16_t port() const;

private:
    void run();

    UdpSocket socket_;
    std::set<std::uint16_t> video_pids_;
    std::thread thread_;
    std::atomic<bool> running_{false};
    std::atomic<bool> capture_{false};
    std::atomic<std::uint64_t> datagrams_{0};
    mutable std::mutex mu_;
    metrics::PathCounters counters_;
    std::map<std::uint16_t, ts::PidState> pid_states_;
    std::vector<std::uint8_t> captured_;
};

} // namespace edgecast::runtime

#endif
