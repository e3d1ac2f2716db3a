#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "helpers.hpp"
#include "mcpforge/protocol.hpp"

using namespace mcpforge;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run_cli(std::vector<std::string> args, const std::string& input = {}) {
    std::istringstream in(input);
    std::ostringstream out, err;
    const int code = cli::run(args, in, out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> with_fixture_embedder(const std::string& table, std::vector<std::string> rest) {
    std::vector<std::string> args = {"--embedder", "fixture", "--embedder-table", table, "--log-level", "error"};
    args.insert(args.end(), rest.begin(), rest.end());
    return args;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli({}).code == cli::exit_usage);
    const auto unknown = run_cli({"box", "stats", "--frobnicate"});
    CHECK(unknown.code == cli::exit_usage);
    CHECK(unknown.err.find("Usage") != std::string::npos);
    CHECK(run_cli({"teleport"}).code == cli::exit_usage);
    CHECK(run_cli({"retrieve", "--box", "x.mcpbox"}).code == cli::exit_usage);  // --query missing
    CHECK(run_cli({"--help"}).code == cli::exit_ok);
}

TEST_CASE("error kinds map to distinct exit codes") {
    const auto damaged = run_cli({"box", "stats", "--box", testing::fixture("corrupt/flipped_byte.mcpbox").string()});
    CHECK(damaged.code == cli::exit_input);
    CHECK(damaged.err.find("corrupt") != std::string::npos);
    CHECK(run_cli({"box", "stats", "--box", testing::fixture("corrupt/future_version.mcpbox").string()}).code ==
          cli::exit_input);
    CHECK(run_cli({"--tau", "1.5", "config"}).code == cli::exit_config);
    CHECK(run_cli({"--config", "/nonexistent/config.json", "config"}).code == cli::exit_config);
    // Hashing embedder does not match the fixture box embedder.
    CHECK(run_cli({"retrieve", "--box", testing::fixture("defaults/defaults.mcpbox").string(), "--query", "q"}).code ==
          cli::exit_config);
}

TEST_CASE("config prints the effective defaults") {
    const auto r = run_cli({"config"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["selection"]["mode"] == "threshold");
    CHECK(j["selection"]["tau"] == 0.7);
    CHECK(json::parse(run_cli({"--mode", "top_k", "--k", "4", "config"}).out)["selection"]["k"] == 4);
}

TEST_CASE("retrieve with defaults and with top_k") {
    std::ifstream in(testing::fixture("defaults/expected.json"));
    const auto expected = json::parse(in);
    const auto table = testing::fixture("defaults/embedder.json").string();
    const auto box = testing::fixture("defaults/defaults.mcpbox").string();

    const auto r = run_cli(with_fixture_embedder(table, {"retrieve", "--box", box, "--query", expected["query"]}));
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    std::vector<std::string> selected;
    for (const auto& s : j["selected"]) selected.push_back(s["mcp_id"]);
    CHECK(selected == expected["selected"].get<std::vector<std::string>>());
    CHECK(j["selection"]["tau"] == 0.7);

    const auto top = run_cli(with_fixture_embedder(
        table, {"--mode", "top_k", "--k", "3", "retrieve", "--box", box, "--query", expected["query"]}));
    REQUIRE(top.code == 0);
    const auto t = json::parse(top.out);
    CHECK(t["selected"].size() == 3);
    CHECK(t["selected"][0]["score"].get<double>() >= t["selected"][1]["score"].get<double>());
    CHECK(t["selected"][1]["score"].get<double>() >= t["selected"][2]["score"].get<double>());
}

TEST_CASE("synthetic pipeline through box build, merge and stats") {
    testing::TempDir dir;
    const auto corpus_dir = (dir / "corpus").string();
    REQUIRE(run_cli({"synth", "redundancy", "--out-dir", corpus_dir}).code == 0);
    const auto table = corpus_dir + "/embedder.json";
    std::vector<std::string> boxes;
    for (int i = 1; i <= 5; ++i) {
        const auto out = (dir / ("iter" + std::to_string(i) + ".mcpbox")).string();
        const auto r = run_cli(with_fixture_embedder(
            table, {"box", "build", "--mcps", corpus_dir + "/iteration_" + std::to_string(i) + ".jsonl", "--out", out}));
        REQUIRE(r.code == 0);
        boxes.push_back(out);
    }

    std::ifstream in(testing::fixture("redundancy/expected.json"));
    const auto expected = json::parse(in);

    std::vector<std::string> stats_args = {"box", "stats", "--cumulative", "--tau", "0.7"};
    for (const auto& b : boxes) {
        stats_args.push_back("--box");
        stats_args.push_back(b);
    }
    const auto rows = run_cli(stats_args);
    REQUIRE(rows.code == 0);
    const auto j = json::parse(rows.out);
    REQUIRE(j.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CAPTURE(i);
        CHECK(j[i]["iteration"] == i + 1);
        CHECK(j[i]["mcp_count"] == expected["rows"][i]["mcp_count"]);
        CHECK(j[i]["cluster_count"] == expected["rows"][i]["cluster_count"]);
        CHECK(std::abs(j[i]["coverage_ratio"].get<double>() - expected["rows"][i]["coverage_ratio"].get<double>()) < 1e-9);
    }

    auto table_args = stats_args;
    table_args.insert(table_args.end(), {"--format", "table"});
    const auto printed = run_cli(table_args);
    REQUIRE(printed.code == 0);
    CHECK(printed.out.rfind("Iter.  # MCPs  # Clusters  Coverage", 0) == 0);
    CHECK(printed.out.find("\n1      26      26          1.00") != std::string::npos);

    // Merging the five boxes equals the cumulative last row.
    const auto merged = (dir / "all.mcpbox").string();
    std::vector<std::string> merge_args = {"box", "merge", "--out", merged};
    for (const auto& b : boxes) merge_args.insert(merge_args.end(), {"--box", b});
    REQUIRE(run_cli(merge_args).code == 0);
    const auto single = json::parse(run_cli({"box", "stats", "--box", merged}).out);
    CHECK(single["mcp_count"] == 128);
    CHECK(single["iteration"] == 5);

    // Identical inputs give byte-identical outputs.
    const auto again = (dir / "again.mcpbox").string();
    merge_args[3] = again;
    REQUIRE(run_cli(merge_args).code == 0);
    CHECK(slurp(merged) == slurp(again));
}

TEST_CASE("scripted suite eval with and without the box") {
    testing::TempDir dir;
    const auto suite = (dir / "suite").string();
    REQUIRE(run_cli({"synth", "suite", "--out-dir", suite}).code == 0);
    const auto table = suite + "/embedder.json";
    const auto box = (dir / "suite.mcpbox").string();
    REQUIRE(run_cli(with_fixture_embedder(table, {"box", "build", "--mcps", suite + "/tools.jsonl", "--out", box})).code == 0);

    const auto metrics = (dir / "base.jsonl").string();
    const auto base = run_cli({"eval", "--tasks", suite + "/tasks.jsonl", "--script", suite + "/script.json",
                           "--metrics-out", metrics});
    REQUIRE(base.code == 0);
    const auto with = run_cli(with_fixture_embedder(
        table, {"eval", "--tasks", suite + "/tasks.jsonl", "--script", suite + "/script.json", "--box", box,
                "--baseline", metrics, "--attempts", "3"}));
    REQUIRE(with.code == 0);
    const auto b = json::parse(base.out), w = json::parse(with.out);
    CHECK(w["pass_at_1"].get<double>() - b["pass_at_1"].get<double>() >= 0.3);
    CHECK(w["wrong_to_right"] == 4);
    CHECK(w["right_to_wrong"] == 0);

    const auto run = run_cli(with_fixture_embedder(
        table, {"run", "--task", suite + "/tasks.jsonl", "--script", suite + "/script.json", "--box", box}));
    REQUIRE(run.code == 0);
    std::istringstream lines(run.out);
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        const auto m = json::parse(line);
        CHECK(m["tokens_source"] == "char_count_proxy");
        ++count;
    }
    CHECK(count == 10);
}

TEST_CASE("serve over stdio in-process") {
    std::ifstream in(testing::fixture("defaults/expected.json"));
    const auto expected = json::parse(in);
    std::ostringstream frames;
    protocol::write_frame(frames, protocol::make_request(1, "initialize").dump());
    protocol::write_frame(frames, protocol::make_request(2, "tools/list").dump());
    const auto r = run_cli(with_fixture_embedder(testing::fixture("defaults/embedder.json").string(),
                                             {"serve", "--box", testing::fixture("defaults/defaults.mcpbox").string(),
                                              "--query", expected["query"]}),
                       frames.str());
    REQUIRE(r.code == 0);
    std::istringstream replies(r.out);
    protocol::read_frame(replies);
    const auto list = json::parse(*protocol::read_frame(replies));
    CHECK(list["result"]["tools"].size() == expected["selected"].size());
}
