#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <string>
#include <utility>

#include "hmpc/local_controller.hpp"

namespace hmpc {

// Line-delimited JSON over TCP. Besides negotiate/commit the stream carries the
// plant-side messages observe, configure, actuate and decentralized, plus info and
// sensitivity for certification, and shutdown.

struct Address {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

[[nodiscard]] inline Address parse_address(const std::string& s) {
    const auto colon = s.rfind(':');
    if (colon == std::string::npos || colon + 1 == s.size()) fail(ErrorCode::InvalidConfig, "address '" + s + "' is not host:port");
    Address a;
    a.host = s.substr(0, colon);
    try {
        const long p = std::stol(s.substr(colon + 1));
        if (p < 0 || p > 65535) throw std::out_of_range("port");
        a.port = static_cast<std::uint16_t>(p);
    } catch (const std::exception&) {
        fail(ErrorCode::InvalidConfig, "address '" + s + "' has an invalid port");
    }
    return a;
}

namespace detail {

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)), buffer_(std::move(o.buffer_)) {}
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = std::exchange(o.fd_, -1);
            buffer_ = std::move(o.buffer_);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    [[nodiscard]] int fd() const { return fd_; }
    [[nodiscard]] bool valid() const { return fd_ >= 0; }

    void close() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

    void send_line(const std::string& line) {
        std::string data = line + '\n';
        const char* p = data.data();
        std::size_t left = data.size();
        while (left > 0) {
            const ssize_t n = ::send(fd_, p, left, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) fail(ErrorCode::TransportError, std::string("send failed: ") + std::strerror(errno));
            p += n;
            left -= static_cast<std::size_t>(n);
        }
    }

    /// False on orderly shutdown by the peer.
    bool read_line(std::string& line) {
        while (true) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return true;
            }
            char chunk[65536];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n < 0) fail(ErrorCode::TransportError, std::string("recv failed: ") + std::strerror(errno));
            if (n == 0) return false;
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

private:
    int fd_ = -1;
    std::string buffer_;
};

inline void no_delay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

inline sockaddr_in resolve(const Address& a) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(a.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr)
        fail(ErrorCode::TransportError, "cannot resolve host '" + a.host + "'");
    sockaddr_in sa = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
    ::freeaddrinfo(res);
    sa.sin_port = htons(a.port);
    return sa;
}

inline json ack() { return {{"type", "ack"}}; }

inline json error_message(const std::string& msg) { return {{"type", "error"}, {"message", msg}}; }

}  // namespace detail

/// Serves one SubsystemHandler to one coordinator connection at a time.
class SubsystemServer {
public:
    SubsystemServer(SubsystemHandler& handler, const Address& bind_to) : handler_(handler) {
        listener_ = detail::Socket(::socket(AF_INET, SOCK_STREAM, 0));
        if (!listener_.valid()) fail(ErrorCode::TransportError, "cannot create socket");
        int one = 1;
        ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in sa = detail::resolve(bind_to);
        if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
            fail(ErrorCode::TransportError, "cannot bind " + bind_to.host + ":" + std::to_string(bind_to.port) + ": " + std::strerror(errno));
        if (::listen(listener_.fd(), 4) != 0) fail(ErrorCode::TransportError, "listen failed");
        socklen_t len = sizeof sa;
        ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&sa), &len);
        port_ = ntohs(sa.sin_port);
    }

    [[nodiscard]] std::uint16_t port() const { return port_; }

    /// Accepts connections until a shutdown message arrives.
    void run() {
        while (!stopped_) {
            const int fd = ::accept(listener_.fd(), nullptr, nullptr);
            if (fd < 0) {
                if (errno == EINTR) continue;
                fail(ErrorCode::TransportError, "accept failed");
            }
            detail::Socket conn(fd);
            detail::no_delay(fd);
            std::string line;
            while (!stopped_ && conn.read_line(line)) conn.send_line(handle_line(line).dump());
        }
    }

    /// Dispatches one message; never throws.
    json handle_line(const std::string& line) {
        try {
            const json msg = json::parse(line);
            if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
                return detail::error_message("message without a type");
            const auto type = msg["type"].get<std::string>();
            if (type == "negotiate" || type == "commit") return to_json(handler_.serve(request_from_json(msg)));
            if (type == "info") {
                const auto i = handler_.info();
                return {{"type", "info"},
                        {"horizon", i.horizon},
                        {"setpoint_dim", i.setpoint_dim},
                        {"coupling_in", i.coupling_in},
                        {"coupling_out", i.coupling_out}};
            }
            if (type == "sensitivity") {
                const auto s = handler_.sensitivity();
                return {{"type", "sensitivity"},
                        {"Mv_bar", codec::matrix_to_json(s.Mv_bar)},
                        {"cols", s.Mv_bar.cols()},
                        {"coupling_channels", s.coupling_channels},
                        {"exogenous_channels", s.exogenous_channels}};
            }
            if (type == "observe") {
                handler_.observe(codec::vector_from_json(msg.at("x"), "x"), msg.value("step", 0L));
                return detail::ack();
            }
            if (type == "configure") {
                CentralCostConfig cc;
                cc.Qc = codec::matrix_from_json(msg.at("Qc"), "Qc");
                cc.Rc = codec::matrix_from_json(msg.at("Rc"), "Rc");
                cc.q = msg.at("q").get<int>();
                cc.r_d = codec::vector_from_json(msg.at("r_d"), "r_d");
                handler_.configure(cc);
                return detail::ack();
            }
            if (type == "actuate") {
                const auto u = handler_.committed_move();
                if (!u) return detail::error_message("no committed move");
                return {{"type", "actuation"}, {"u", codec::vector_to_json(*u)}};
            }
            if (type == "decentralized") {
                const Vector r = codec::vector_from_json(msg.at("r"), "r");
                const Profile e = codec::profile_from_json(msg.at("exogenous"));
                const Profile exo = e.horizon() == 0 ? Profile(handler_.info().horizon, 0) : e;
                return {{"type", "actuation"}, {"u", codec::vector_to_json(handler_.decentralized_move(r, exo))}};
            }
            if (type == "shutdown") {
                stopped_ = true;
                return detail::ack();
            }
            return detail::error_message("unknown message type '" + type + "'");
        } catch (const std::exception& e) {
            return detail::error_message(e.what());
        }
    }

private:
    SubsystemHandler& handler_;
    detail::Socket listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopped_{false};
};

/// Coordinator-side proxy for a subsystem served by SubsystemServer.
class RemoteSubsystem final : public SubsystemAgent {
public:
    explicit RemoteSubsystem(const Address& addr) {
        sock_ = detail::Socket(::socket(AF_INET, SOCK_STREAM, 0));
        if (!sock_.valid()) fail(ErrorCode::TransportError, "cannot create socket");
        sockaddr_in sa = detail::resolve(addr);
        if (::connect(sock_.fd(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0)
            fail(ErrorCode::TransportError, "cannot connect to " + addr.host + ":" + std::to_string(addr.port) + ": " + std::strerror(errno));
        detail::no_delay(sock_.fd());
        const json i = expect(exchange({{"type", "info"}}), "info");
        info_ = {i.at("horizon").get<Index>(), i.at("setpoint_dim").get<Index>(), i.at("coupling_in").get<Index>(),
                 i.at("coupling_out").get<Index>()};
    }

    NegotiationResponse serve(const NegotiationRequest& request) override {
        return response_from_json(exchange(to_json(request)), info_.coupling_out);
    }

    [[nodiscard]] SubsystemInfo info() const override { return info_; }

    [[nodiscard]] SensitivityReport sensitivity() const override {
        const json s = expect(exchange({{"type", "sensitivity"}}), "sensitivity");
        SensitivityReport r;
        r.Mv_bar = codec::matrix_from_json(s.at("Mv_bar"), "Mv_bar", s.at("cols").get<Index>());
        r.coupling_channels = s.at("coupling_channels").get<Index>();
        r.exogenous_channels = s.at("exogenous_channels").get<Index>();
        return r;
    }

    void observe(const Vector& x, long step) override {
        expect(exchange({{"type", "observe"}, {"x", codec::vector_to_json(x)}, {"step", step}}), "ack");
    }

    void configure(const CentralCostConfig& cc) override {
        expect(exchange({{"type", "configure"},
                         {"Qc", codec::matrix_to_json(cc.Qc)},
                         {"Rc", codec::matrix_to_json(cc.Rc)},
                         {"q", cc.q},
                         {"r_d", codec::vector_to_json(cc.r_d)}}),
               "ack");
    }

    [[nodiscard]] std::optional<Vector> committed_move() const override {
        const json r = exchange({{"type", "actuate"}});
        if (r.value("type", "") != "actuation") return std::nullopt;
        return codec::vector_from_json(r.at("u"), "u");
    }

    Vector decentralized_move(const Vector& r, const Profile& exogenous) override {
        const json m = expect(exchange({{"type", "decentralized"},
                                        {"r", codec::vector_to_json(r)},
                                        {"exogenous", exogenous.width() == 0 ? json::array() : codec::profile_to_json(exogenous)}}),
                              "actuation");
        return codec::vector_from_json(m.at("u"), "u");
    }

    void shutdown() { exchange({{"type", "shutdown"}}); }

private:
    json exchange(const json& msg) const {
        std::lock_guard lock(mutex_);
        sock_.send_line(msg.dump());
        std::string line;
        if (!sock_.read_line(line)) fail(ErrorCode::TransportError, "subsystem closed the connection");
        try {
            return json::parse(line);
        } catch (const json::parse_error& e) {
            fail(ErrorCode::TransportError, std::string("malformed reply: ") + e.what());
        }
    }

    static json expect(const json& reply, const char* type) {
        if (reply.value("type", "") == type) return reply;
        fail(ErrorCode::TransportError, "expected '" + std::string(type) + "' reply, got " + reply.dump());
    }

    mutable detail::Socket sock_;
    mutable std::mutex mutex_;
    SubsystemInfo info_;
};

}  // namespace hmpc
