#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "spantree/cli.hpp"
#include "support/fixtures.hpp"

using namespace spantree;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliResult r;
    r.code = cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

const fs::path& fixture_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "spantree_cli_fixtures";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string write_fixture(const std::string& name, const std::string& content) {
    const fs::path p = fixture_dir() / name;
    std::ofstream f(p, std::ios::binary);
    f << content;
    return p.string();
}

const std::string kK4Json =
    "{\"directed\": false, \"nodes\": 4, \"edges\": ["
    "{\"u\": 0, \"v\": 1, \"w\": 1.0}, {\"u\": 0, \"v\": 2, \"w\": 1.0}, "
    "{\"u\": 0, \"v\": 3, \"w\": 1.0}, {\"u\": 1, \"v\": 2, \"w\": 1.0}, "
    "{\"u\": 1, \"v\": 3, \"w\": 1.0}, {\"u\": 2, \"v\": 3, \"w\": 1.0}]}\n";

const std::string kPath3Text = "# path 0-1-2\n0 1 1.0\n1 2 1.0\n";

const std::string kPath3Json =
    "{\"directed\": false, \"nodes\": 3, \"edges\": ["
    "{\"u\": 0, \"v\": 1, \"w\": 1.0}, {\"u\": 1, \"v\": 2, \"w\": 1.0}]}\n";

const std::string kWtriJson =
    "{\"directed\": false, \"nodes\": 3, \"edges\": ["
    "{\"u\": 0, \"v\": 1, \"w\": 1.0, \"omega\": 1.0}, "
    "{\"u\": 1, \"v\": 2, \"w\": 2.0, \"omega\": 1.0}, "
    "{\"u\": 0, \"v\": 2, \"w\": 3.0, \"omega\": 1.0}]}\n";

std::string golden_path(const std::string& name) {
    return std::string(SPANTREE_TEST_DIR) + "/golden/" + name;
}

std::string read_all(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("expectation command") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    CliResult r = run({"expectation", "--graph", k4, "--node", "0"});
    REQUIRE(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    REQUIRE(doc.at("command") == "expectation");
    REQUIRE(doc.at("values").at("expectation") == 1.5);
    REQUIRE(doc.contains("input_digest"));
    REQUIRE(doc.contains("root"));
    REQUIRE(doc.at("diagnostics").contains("condition_estimate"));
    REQUIRE(doc.at("diagnostics").contains("max_solve_residual"));
    REQUIRE(doc.at("diagnostics").contains("warnings"));
}

TEST_CASE("golden documents stay byte-identical") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    const std::string path3 = write_fixture("path3.txt", kPath3Text);
    const std::string wtri = write_fixture("wtri.json", kWtriJson);

    CliResult exp = run({"expectation", "--graph", k4, "--node", "0"});
    REQUIRE(exp.code == 0);
    REQUIRE(exp.out == read_all(golden_path("expectation_k4.json")));

    CliResult ep = run({"edge-prob", "--graph", path3, "--edge", "0,1"});
    REQUIRE(ep.code == 0);
    REQUIRE(ep.out == read_all(golden_path("edge_prob_path3.json")));

    CliResult chk = run({"check", "--graph", wtri, "--node", "0"});
    REQUIRE(chk.code == 0);
    REQUIRE(chk.out == read_all(golden_path("check_wtri.json")));
}

TEST_CASE("text and JSON inputs produce identical values payloads") {
    const std::string txt = write_fixture("path3.txt", kPath3Text);
    const std::string json = write_fixture("path3.json", kPath3Json);
    for (const std::vector<std::string> tail :
         {std::vector<std::string>{"expectation", "--node", "1"},
          std::vector<std::string>{"edge-prob", "--edge", "0,1"},
          std::vector<std::string>{"tree-weight"}}) {
        std::vector<std::string> a{tail[0], "--graph", txt};
        std::vector<std::string> b{tail[0], "--graph", json};
        a.insert(a.end(), tail.begin() + 1, tail.end());
        b.insert(b.end(), tail.begin() + 1, tail.end());
        CliResult ra = run(a);
        CliResult rb = run(b);
        REQUIRE(ra.code == 0);
        REQUIRE(rb.code == 0);
        const auto va = cli::dump_g17(nlohmann::ordered_json::parse(ra.out).at("values"));
        const auto vb = cli::dump_g17(nlohmann::ordered_json::parse(rb.out).at("values"));
        REQUIRE(va == vb);
    }
}

TEST_CASE("edge-prob --all sums to n-1") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    CliResult r = run({"edge-prob", "--graph", k4, "--all"});
    REQUIRE(r.code == 0);
    auto doc = nlohmann::json::parse(r.out);
    REQUIRE(doc.at("values").at("edges").size() == 6);
    REQUIRE(std::abs(doc.at("values").at("sum").get<double>() - 3.0) < 1e-10);
}

TEST_CASE("bridge edge probability is one") {
    const std::string path3 = write_fixture("path3.txt", kPath3Text);
    CliResult r = run({"edge-prob", "--graph", path3, "--edge", "0,1"});
    REQUIRE(r.code == 0);
    REQUIRE(nlohmann::json::parse(r.out).at("values").at("probability") == 1.0);
}

TEST_CASE("distribution command") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    CliResult r = run({"distribution", "--graph", k4, "--node", "0"});
    REQUIRE(r.code == 0);
    auto dist = nlohmann::json::parse(r.out).at("values").at("distribution");
    REQUIRE(std::abs(dist.at("1").get<double>() - 9.0 / 16.0) < 1e-9);
    REQUIRE(std::abs(dist.at("3").get<double>() - 1.0 / 16.0) < 1e-9);

    CliResult exact = run({"distribution", "--graph", k4, "--node", "0", "--exact"});
    REQUIRE(exact.code == 0);
    auto exact_dist = nlohmann::json::parse(exact.out).at("values").at("distribution");
    for (const auto& [k, p] : exact_dist.items())
        REQUIRE(std::abs(p.get<double>() - dist.at(k).get<double>()) < 1e-9);

    CliResult joint = run({"distribution", "--graph", k4, "--node", "0", "--joint", "1"});
    REQUIRE(joint.code == 0);
    auto jv = nlohmann::json::parse(joint.out).at("values").at("joint");
    double sum = 0.0;
    for (const auto& [key, p] : jv.items()) sum += p.get<double>();
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
}

TEST_CASE("decomposable command") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    CliResult r = run({"decomposable", "--graph", k4, "--variance"});
    REQUIRE(r.code == 0);
    auto values = nlohmann::json::parse(r.out).at("values");
    REQUIRE(std::abs(values.at("expectation").get<double>() - 3.0) < 1e-10);
    REQUIRE(std::abs(values.at("variance").get<double>()) < 1e-8);
}

TEST_CASE("tree-weight command") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    CliResult r = run({"tree-weight", "--graph", k4});
    REQUIRE(r.code == 0);
    auto values = nlohmann::json::parse(r.out).at("values");
    REQUIRE(std::abs(values.at("tree_weight").get<double>() - 16.0) < 1e-9);
    REQUIRE(values.at("sign") == 1);

    CliResult lg = run({"tree-weight", "--graph", k4, "--log"});
    auto lv = nlohmann::json::parse(lg.out).at("values");
    REQUIRE_FALSE(lv.contains("tree_weight"));
    REQUIRE(std::abs(lv.at("log_tree_weight").get<double>() - std::log(16.0)) < 1e-9);

    // No spanning tree: weight 0, sign 0, exit 0 with a warning.
    const std::string split =
        write_fixture("split.json",
                      "{\"directed\": false, \"nodes\": 4, \"edges\": ["
                      "{\"u\": 0, \"v\": 1, \"w\": 1.0}, {\"u\": 2, \"v\": 3, \"w\": 1.0}]}");
    CliResult s = run({"tree-weight", "--graph", split});
    REQUIRE(s.code == 0);
    auto sv = nlohmann::json::parse(s.out);
    REQUIRE(sv.at("values").at("tree_weight") == 0.0);
    REQUIRE(sv.at("values").at("sign") == 0);
    REQUIRE(sv.at("diagnostics").at("warnings").size() == 1);
}

TEST_CASE("sample command is deterministic and consistent") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    const std::vector<std::string> cmd{"sample",  "--graph", k4,        "--count", "20000",
                                       "--seed",  "42",      "--moments", "0",     "--threads",
                                       "1"};
    CliResult a = run(cmd);
    CliResult b = run(cmd);
    REQUIRE(a.code == 0);
    REQUIRE(a.out == b.out);
    auto values = nlohmann::json::parse(a.out).at("values");
    const auto& m = values.at("moments").at(0);
    const double se = std::sqrt(0.375 / 20000.0);
    REQUIRE(std::abs(m.at("mean").get<double>() - 1.5) < 4.0 * se);
    // Edge frequencies are close to the analytic probability 1/2.
    for (const auto& item : values.at("edge_frequencies"))
        REQUIRE(std::abs(item.at("frequency").get<double>() - 0.5) < 0.02);
}

TEST_CASE("enumerate command") {
    const std::string k4 = write_fixture("k4.json", kK4Json);
    CliResult r = run({"enumerate", "--graph", k4, "--report"});
    REQUIRE(r.code == 0);
    auto values = nlohmann::json::parse(r.out).at("values");
    REQUIRE(values.at("tree_count") == 16);
    REQUIRE(std::abs(values.at("total_weight").get<double>() - 16.0) < 1e-9);
    REQUIRE(std::abs(values.at("expected_degree").at(0).get<double>() - 1.5) < 1e-12);
    REQUIRE(values.at("edge_probabilities").size() == 6);
}

TEST_CASE("check command cross-validates every path") {
    const std::string wtri = write_fixture("wtri.json", kWtriJson);
    CliResult r = run({"check", "--graph", wtri, "--node", "0"});
    REQUIRE(r.code == 0);
    auto values = nlohmann::json::parse(r.out).at("values");
    REQUIRE(values.at("max_relative_discrepancy").get<double>() <= 1e-9);
    REQUIRE(values.at("all_pass") == true);
    REQUIRE(values.at("oracle_used") == true);
    // The oracle expectation 14/11 appears in the report.
    REQUIRE(r.out.find("1.2727272727272727") != std::string::npos);

    const std::string k4 = write_fixture("k4.json", kK4Json);
    CliResult all = run({"check", "--graph", k4});
    REQUIRE(all.code == 0);

    const std::string dir = write_fixture(
        "dir_check.json",
        "{\"directed\": true, \"nodes\": 3, \"edges\": ["
        "{\"u\": 0, \"v\": 2, \"w\": 1.5}, {\"u\": 0, \"v\": 1, \"w\": 0.5}, "
        "{\"u\": 1, \"v\": 2, \"w\": 2.0}, {\"u\": 2, \"v\": 1, \"w\": 1.0}]}");
    CliResult dchk = run({"check", "--graph", dir, "--root", "2"});
    REQUIRE(dchk.code == 0);
    REQUIRE(nlohmann::json::parse(dchk.out).at("values").at("all_pass") == true);
}

TEST_CASE("exit codes") {
    const std::string k4 = write_fixture("k4.json", kK4Json);

    REQUIRE(run({"expectation", "--graph", "/does/not/exist.json", "--node", "0"}).code == 2);
    REQUIRE(run({"expectation", "--graph",
                 write_fixture("bad.json", "{\"nodes\": oops"), "--node", "0"}).code == 2);
    REQUIRE(run({"expectation", "--graph",
                 write_fixture("bad2.json", "{\"nodes\": 2, \"edges\": [{\"u\": 0}]}"),
                 "--node", "0"}).code == 2);
    REQUIRE(run({"bogus-command", "--graph", k4}).code == 2);
    REQUIRE(run({"covariance", "--graph", k4, "--nodes", "1,1"}).code == 2);
    REQUIRE(run({"edge-prob", "--graph", k4}).code == 2);
    REQUIRE(run({"expectation", "--graph", k4, "--node", "9"}).code == 2);

    const std::string split =
        write_fixture("split2.json",
                      "{\"directed\": false, \"nodes\": 4, \"edges\": ["
                      "{\"u\": 0, \"v\": 1, \"w\": 1.0}, {\"u\": 2, \"v\": 3, \"w\": 1.0}]}");
    REQUIRE(run({"expectation", "--graph", split, "--node", "0"}).code == 3);

    const std::string frac = write_fixture(
        "frac.json",
        "{\"directed\": false, \"nodes\": 3, \"edges\": ["
        "{\"u\": 0, \"v\": 1, \"w\": 1.0, \"omega\": 0.5}, "
        "{\"u\": 1, \"v\": 2, \"w\": 1.0}, {\"u\": 0, \"v\": 2, \"w\": 1.0}]}");
    REQUIRE(run({"distribution", "--graph", frac, "--node", "0"}).code == 5);

    REQUIRE(run({"enumerate", "--graph", k4, "--cap", "3"}).code == 5);

    const std::string dir = write_fixture(
        "dir.json",
        "{\"directed\": true, \"nodes\": 3, \"edges\": ["
        "{\"u\": 0, \"v\": 2, \"w\": 1.0}, {\"u\": 0, \"v\": 1, \"w\": 1.0}, "
        "{\"u\": 1, \"v\": 2, \"w\": 1.0}]}");
    REQUIRE(run({"expectation", "--graph", dir, "--node", "1"}).code == 2);  // missing --root
    REQUIRE(run({"expectation", "--graph", dir, "--node", "1", "--root", "0"}).code == 3);
    CliResult ok = run({"expectation", "--graph", dir, "--node", "1", "--root", "2"});
    REQUIRE(ok.code == 0);
    REQUIRE(std::abs(nlohmann::json::parse(ok.out).at("values").at("expectation").get<double>() -
                     1.5) < 1e-12);

    // stdout stays clean on errors.
    REQUIRE(run({"expectation", "--graph", split, "--node", "0"}).out.empty());
}

TEST_CASE("input digest depends on content, not the file name") {
    const std::string a = write_fixture("digest_a.json", kK4Json);
    const std::string b = write_fixture("digest_b.json", kK4Json);
    auto da = nlohmann::json::parse(run({"tree-weight", "--graph", a}).out).at("input_digest");
    auto db = nlohmann::json::parse(run({"tree-weight", "--graph", b}).out).at("input_digest");
    REQUIRE(da == db);
}

TEST_CASE("graph JSON round-trip is the identity") {
    spantree::SplitMix64 rng(31415);
    for (int round = 0; round < 20; ++round) {
        const int n = 2 + static_cast<int>(rng.next() % 6);
        Graph g = fixtures::random_connected_graph(rng, n);
        Graph back = parse_graph_json(graph_to_json(g));
        REQUIRE(back.node_count() == g.node_count());
        REQUIRE(back.directed() == g.directed());
        REQUIRE(back.edge_count() == g.edge_count());
        for (int id = 0; id < g.edge_count(); ++id) {
            REQUIRE(back.edge(id).u == g.edge(id).u);
            REQUIRE(back.edge(id).v == g.edge(id).v);
            REQUIRE(back.edge(id).w == g.edge(id).w);          // bit-exact
            REQUIRE(back.edge(id).omega == g.edge(id).omega);  // bit-exact
        }
    }
}

TEST_CASE("help exits cleanly") {
    CliResult r = run({"--help"});
    REQUIRE(r.code == 0);
    REQUIRE_FALSE(r.out.empty());
}
