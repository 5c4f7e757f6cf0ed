// SPDX-License-Identifier: Apache-2.0
#include <arpa/inet.h>
#include <fmt/format.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <string>

#include "ddose/digest.hpp"
#include "ddose/text.hpp"

namespace ddose::digest {

namespace {

class Socket {
public:
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket() {
        if (fd_ >= 0) ::close(fd_);
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    int fd() const { return fd_; }

    bool send_all(std::string_view data) const {
        size_t sent = 0;
        while (sent < data.size()) {
            const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, 0);
            if (n <= 0) return false;
            sent += static_cast<size_t>(n);
        }
        return true;
    }

    /// Reads one SMTP reply; multiline replies end at "NNN " (space form).
    /// Returns the 3-digit code, or -1 on transport failure.
    int read_reply() {
        std::string line;
        for (;;) {
            char c = 0;
            const ssize_t n = ::recv(fd_, &c, 1, 0);
            if (n <= 0) return -1;
            if (c == '\n') {
                if (line.size() >= 4 && std::isdigit(line[0]) && std::isdigit(line[1]) &&
                    std::isdigit(line[2]) && line[3] == ' ')
                    return std::stoi(line.substr(0, 3));
                line.clear();
                continue;
            }
            if (c != '\r') line += c;
        }
    }

private:
    int fd_ = -1;
};

/// RFC 5321 dot-stuffing plus CRLF normalization for the DATA section.
std::string stuff_data(std::string_view body) {
    std::string out;
    out.reserve(body.size());
    bool at_line_start = true;
    for (const char c : body) {
        if (c == '\n') {
            out += "\r\n";
            at_line_start = true;
            continue;
        }
        if (at_line_start && c == '.') out += '.';
        at_line_start = false;
        if (c != '\r') out += c;
    }
    if (!at_line_start) out += "\r\n";
    return out;
}

std::string mime_message(const SmtpTransport::Options& options, const DigestDocument& digest) {
    constexpr std::string_view boundary = "=_daily_dose_boundary";
    std::string message;
    message += fmt::format("From: The Daily Dose <{}>\n", options.from_address);
    message += fmt::format("To: {} <{}>\n", digest.physician.display_name,
                           digest.physician.email);
    message += fmt::format("Subject: The Daily Dose for {}\n", digest.run_date.to_string());
    message += "MIME-Version: 1.0\n";
    message += fmt::format("Content-Type: multipart/alternative; boundary=\"{}\"\n\n", boundary);
    message += fmt::format("--{}\nContent-Type: text/plain; charset=utf-8\n\n{}\n", boundary,
                           digest.markdown_source);
    message += fmt::format("--{}\nContent-Type: text/html; charset=utf-8\n\n{}\n", boundary,
                           digest.html_rendered);
    message += fmt::format("--{}--\n", boundary);
    return message;
}

}  // namespace

Result<DeliveryReceipt> SmtpTransport::deliver(const DigestDocument& digest) {
    using R = Result<DeliveryReceipt>;
    auto fail = [](std::string what) { return R::failure("transport", std::move(what)); };

    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (sock.fd() < 0) return fail("cannot open socket");
    timeval timeout{};
    timeout.tv_sec = 10;
    ::setsockopt(sock.fd(), SOL_SOCKET, SO_RCVTIMEO, &timeout, sizeof(timeout));
    ::setsockopt(sock.fd(), SOL_SOCKET, SO_SNDTIMEO, &timeout, sizeof(timeout));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(options_.port));
    if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1)
        return fail(fmt::format("bad SMTP host '{}'", options_.host));
    if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        return fail(fmt::format("connection to {}:{} refused", options_.host, options_.port));

    auto expect = [&](int want, std::string_view stage) -> std::optional<std::string> {
        const int got = sock.read_reply();
        if (got == want) return std::nullopt;
        return fmt::format("{} expected {}, got {}", stage, want, got);
    };
    auto command = [&](std::string line, int want,
                       std::string_view stage) -> std::optional<std::string> {
        if (!sock.send_all(line + "\r\n")) return fmt::format("{}: send failed", stage);
        return expect(want, stage);
    };

    if (auto err = expect(220, "greeting")) return fail(*err);
    if (auto err = command("EHLO daily-dose", 250, "EHLO")) return fail(*err);
    if (auto err = command(fmt::format("MAIL FROM:<{}>", options_.from_address), 250, "MAIL"))
        return fail(*err);
    if (auto err = command(fmt::format("RCPT TO:<{}>", digest.physician.email), 250, "RCPT"))
        return fail(*err);
    if (auto err = command("DATA", 354, "DATA")) return fail(*err);
    if (!sock.send_all(stuff_data(mime_message(options_, digest)) + ".\r\n"))
        return fail("DATA body: send failed");
    if (auto err = expect(250, "DATA completion")) return fail(*err);
    sock.send_all("QUIT\r\n");

    DeliveryReceipt receipt;
    receipt.physician_id = digest.physician.physician_id;
    receipt.run_date = digest.run_date.to_string();
    receipt.transport = "smtp";
    receipt.timestamp = options_.now();
    receipt.content_hash = text::fnv1a_hex(digest.markdown_source);
    receipt.location = fmt::format("smtp://{}:{}/{}", options_.host, options_.port,
                                   digest.physician.email);
    const std::lock_guard<std::mutex> lock(mutex_);
    const std::string key = receipt.run_date + "/" + receipt.physician_id;
    const auto seen = delivered_.find(key);
    receipt.duplicate = seen != delivered_.end() && seen->second == receipt.content_hash;
    delivered_[key] = receipt.content_hash;
    return receipt;
}

}  // namespace ddose::digest
