#include "mcpforge/protocol.hpp"

#include <cerrno>
#include <charconv>
#include <istream>
#include <ostream>

#include <unistd.h>

#include "mcpforge/error.hpp"
#include "text.hpp"

namespace mcpforge::protocol {

namespace {

constexpr std::string_view content_length = "content-length:";
constexpr std::size_t max_frame = 64u << 20;

std::size_t parse_length(std::string_view header_line) {
    auto value = text::trim(header_line.substr(content_length.size()));
    std::size_t n = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
    if (ec != std::errc{} || ptr != value.data() + value.size()) {
        fail(ErrorKind::protocol, "bad Content-Length header");
    }
    if (n > max_frame) fail(ErrorKind::protocol, "frame too large");
    return n;
}

bool is_length_header(std::string_view line) {
    return text::lower(line.substr(0, content_length.size())) == content_length;
}

}  // namespace

json make_request(const json& id, const std::string& method, json params) {
    return {{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", std::move(params)}};
}

json make_notification(const std::string& method, json params) {
    return {{"jsonrpc", "2.0"}, {"method", method}, {"params", std::move(params)}};
}

json make_result(const json& id, json result) {
    return {{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
}

json make_error(const json& id, int code, const std::string& message, json data) {
    json err{{"code", code}, {"message", message}};
    if (!data.is_null()) err["data"] = std::move(data);
    return {{"jsonrpc", "2.0"}, {"id", id}, {"error", std::move(err)}};
}

void write_frame(std::ostream& out, const std::string& payload) {
    out << "Content-Length: " << payload.size() << "\r\n\r\n" << payload;
    out.flush();
}

void write_frame(int fd, const std::string& payload) {
    const auto data = "Content-Length: " + std::to_string(payload.size()) + "\r\n\r\n" + payload;
    std::size_t off = 0;
    while (off < data.size()) {
        const auto w = ::write(fd, data.data() + off, data.size() - off);
        if (w < 0) {
            if (errno == EINTR) continue;
            fail(ErrorKind::protocol, "write failed");
        }
        off += static_cast<std::size_t>(w);
    }
}

std::optional<std::string> read_frame(std::istream& in, bool* length_framed) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        if (length_framed) *length_framed = is_length_header(line);
        if (!is_length_header(line)) return line;  // bare JSON line

        const auto n = parse_length(line);
        // Skip remaining headers up to the blank separator line.
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) break;
        }
        std::string payload(n, '\0');
        in.read(payload.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in.gcount()) != n) fail(ErrorKind::protocol, "truncated frame");
        return payload;
    }
    return std::nullopt;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<std::string> FrameDecoder::next() {
    while (true) {
        const auto start = buffer_.find_first_not_of(" \t\r\n");
        if (start == std::string::npos) {
            buffer_.clear();
            return std::nullopt;
        }
        if (start > 0) buffer_.erase(0, start);
        const auto eol = buffer_.find('\n');
        if (!is_length_header(std::string_view(buffer_).substr(0, content_length.size()))) {
            if (buffer_.size() < content_length.size() &&
                text::lower(buffer_) == std::string(content_length.substr(0, buffer_.size()))) {
                return std::nullopt;  // header prefix still arriving
            }
            if (eol == std::string::npos) return std::nullopt;
            std::string line = buffer_.substr(0, eol);
            buffer_.erase(0, eol + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (text::trim(line).empty()) continue;
            return line;
        }
        const auto header_end = buffer_.find("\r\n\r\n");
        const auto alt_end = buffer_.find("\n\n");
        std::size_t body;
        std::size_t header_len;
        if (header_end != std::string::npos && (alt_end == std::string::npos || header_end <= alt_end)) {
            body = header_end + 4;
            header_len = header_end;
        } else if (alt_end != std::string::npos) {
            body = alt_end + 2;
            header_len = alt_end;
        } else {
            return std::nullopt;
        }
        auto first = std::string_view(buffer_).substr(0, std::min(header_len, eol == std::string::npos ? header_len : eol));
        if (!first.empty() && first.back() == '\r') first.remove_suffix(1);
        const auto n = parse_length(first);
        if (buffer_.size() < body + n) return std::nullopt;
        std::string payload = buffer_.substr(body, n);
        buffer_.erase(0, body + n);
        return payload;
    }
}

}  // namespace mcpforge::protocol
