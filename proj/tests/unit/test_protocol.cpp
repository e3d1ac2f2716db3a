#include <doctest.h>

#include <sstream>

#include "mcpforge/error.hpp"
#include "mcpforge/protocol.hpp"

using namespace mcpforge;
namespace rpc = mcpforge::protocol;

TEST_CASE("message constructors") {
    const auto req = rpc::make_request(7, "tools/list");
    CHECK(req["jsonrpc"] == "2.0");
    CHECK(req["id"] == 7);
    CHECK(req["params"].is_object());
    CHECK_FALSE(rpc::make_notification("x").contains("id"));
    const auto err = rpc::make_error(1, rpc::invalid_params, "bad", {{"kind", "validation"}});
    CHECK(err["error"]["code"] == -32602);
    CHECK(err["error"]["data"]["kind"] == "validation");
    CHECK_FALSE(rpc::make_error(1, rpc::internal_error, "x")["error"].contains("data"));
}

TEST_CASE("stream frames round-trip and bare lines are accepted") {
    std::stringstream ss;
    rpc::write_frame(ss, R"({"a":1})");
    rpc::write_frame(ss, "{\"b\":\"line\\nbreak\"}");
    ss << "{\"bare\":true}\n\n";
    bool framed = false;
    CHECK(rpc::read_frame(ss, &framed) == std::optional<std::string>(R"({"a":1})"));
    CHECK(framed);
    CHECK(rpc::read_frame(ss) == std::optional<std::string>("{\"b\":\"line\\nbreak\"}"));
    CHECK(rpc::read_frame(ss, &framed) == std::optional<std::string>(R"({"bare":true})"));
    CHECK_FALSE(framed);
    CHECK_FALSE(rpc::read_frame(ss).has_value());
}

TEST_CASE("malformed stream frames") {
    std::istringstream bad_length("Content-Length: abc\r\n\r\n{}");
    CHECK_THROWS_AS(rpc::read_frame(bad_length), Error);
    std::istringstream short_body("Content-Length: 10\r\n\r\n{}");
    CHECK_THROWS_WITH(rpc::read_frame(short_body), "truncated frame");
    std::istringstream huge("Content-Length: 999999999999\r\n\r\n");
    CHECK_THROWS_AS(rpc::read_frame(huge), Error);
}

TEST_CASE("frame decoder handles input split at every byte") {
    const std::string stream = "Content-Length: 7\r\n\r\n{\"a\":1}content-length: 2\n\n{}{\"line\":1}\n";
    for (std::size_t cut = 0; cut <= stream.size(); ++cut) {
        rpc::FrameDecoder d;
        std::vector<std::string> got;
        d.feed(std::string_view(stream).substr(0, cut));
        while (auto f = d.next()) got.push_back(*f);
        d.feed(std::string_view(stream).substr(cut));
        while (auto f = d.next()) got.push_back(*f);
        CAPTURE(cut);
        CHECK(got == std::vector<std::string>{"{\"a\":1}", "{}", "{\"line\":1}"});
        CHECK(d.empty());
    }
}

TEST_CASE("frame decoder waits for a complete line or body") {
    rpc::FrameDecoder d;
    d.feed("Content-Len");
    CHECK_FALSE(d.next().has_value());
    d.feed("gth: 4\r\n\r\nnu");
    CHECK_FALSE(d.next().has_value());
    d.feed("ll");
    CHECK(d.next() == std::optional<std::string>("null"));
    d.feed("Content-Length: x\r\n\r\n");
    CHECK_THROWS_AS(d.next(), Error);
}
