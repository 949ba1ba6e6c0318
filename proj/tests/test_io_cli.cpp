#include <doctest.h>

#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "airylab/cli.hpp"
#include "airylab/functionals.hpp"
#include "airylab/io.hpp"

using namespace airylab;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& tag) {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() /
                   ("airylab_test_" + tag + "_" + std::to_string(++counter));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

// CLI error paths write diagnostics to the standard streams; keep the test
// log clean while they run.
struct StreamSilencer {
    std::ostringstream sink;
    std::streambuf* old_err;
    std::streambuf* old_out;
    StreamSilencer()
        : old_err(std::cerr.rdbuf(sink.rdbuf())), old_out(std::cout.rdbuf(sink.rdbuf())) {}
    ~StreamSilencer() {
        std::cerr.rdbuf(old_err);
        std::cout.rdbuf(old_out);
    }
};

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    // Enough of RFC 4180 to read our own tables back.
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(field);
            field.clear();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            row.push_back(field);
            field.clear();
            rows.push_back(row);
            row.clear();
            ++i;
        } else {
            field += c;
        }
    }
    if (!field.empty() || !row.empty()) {
        row.push_back(field);
        rows.push_back(row);
    }
    return rows;
}

} // namespace

TEST_CASE("csv_escape quotes exactly the fields that need it") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("") == "");
    CHECK(csv_escape("1.5e-3") == "1.5e-3");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv_escape("line\nbreak") == "\"line\nbreak\"");
    CHECK(csv_escape("cr\rhere") == "\"cr\rhere\"");
    CHECK(csv_escape(",\"\n") == "\",\"\"\n\"");
}

TEST_CASE("format_double round-trips bitwise and names non-finite values") {
    const std::vector<double> values{0.0,    1.0,       -1.0,     1.0 / 3.0, 2.0 / 3.0,
                                     0.1,    -2.5,      1e-300,   1e300,     6.02214076e23,
                                     1e-9,   3.14159,   -0.0,     5e-324,    1.7976931348623157e308,
                                     123456789.123456789};
    for (double v : values) {
        const std::string text = format_double(v);
        double back = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), back);
        REQUIRE(res.ec == std::errc{});
        CHECK_MESSAGE(std::memcmp(&back, &v, sizeof v) == 0, "text '", text, "'");
    }
    CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
    CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("sha256 matches the published test vectors") {
    CHECK(sha256_bytes(nullptr, 0) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const std::string abc = "abc";
    CHECK(sha256_bytes(abc.data(), abc.size()) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    const std::string two_blocks = "abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq";
    CHECK(sha256_bytes(two_blocks.data(), two_blocks.size()) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
    const std::string million(1000000, 'a');
    CHECK(sha256_bytes(million.data(), million.size()) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");

    const fs::path dir = make_temp_dir("sha");
    std::ofstream(dir / "f.bin", std::ios::binary) << abc;
    CHECK(sha256_file(dir / "f.bin") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    fs::remove_all(dir);
}

TEST_CASE("CsvWriter emits CRLF rows with escaping applied") {
    const fs::path dir = make_temp_dir("csv");
    {
        CsvWriter w(dir / "t.csv");
        w.row({"a", "b"});
        w.row({"1,5", "x\"y"});
    }
    CHECK(slurp(dir / "t.csv") == "a,b\r\n\"1,5\",\"x\"\"y\"\r\n");
    CHECK_THROWS_AS(CsvWriter(dir / "no_such_subdir" / "t.csv"), InvalidInput);
    fs::remove_all(dir);
}

TEST_CASE("manifest records version, config echo, and artifact hashes") {
    const fs::path dir = make_temp_dir("manifest");
    {
        CsvWriter w(dir / "result.csv");
        w.row({"x", "y"});
        w.row({"1", "2"});
    }
    write_manifest(dir / "m.json", "demo", R"({"k":3,"t":1.5})", 42,
                   {dir / "result.csv"}, 0.25);
    const nlohmann::json m = nlohmann::json::parse(slurp(dir / "m.json"));
    CHECK(m.at("version").get<std::string>() == "0.1.0");
    CHECK(m.at("subcommand").get<std::string>() == "demo");
    CHECK(m.at("seed").get<std::uint64_t>() == 42);
    CHECK(m.at("config").at("k").get<int>() == 3);
    CHECK(m.at("config").at("t").get<double>() == 1.5);
    REQUIRE(m.at("artifacts").size() == 1);
    CHECK(m.at("artifacts")[0].at("path").get<std::string>() == "result.csv");
    CHECK(m.at("artifacts")[0].at("sha256").get<std::string>() ==
          sha256_file(dir / "result.csv"));
    fs::remove_all(dir);
}

TEST_CASE("alpha-k subcommand writes the sphere maximum with its manifest") {
    const fs::path dir = make_temp_dir("alpha");
    const int code = run_cli({"alpha-k", "--k", "1", "--out", dir.string()});
    REQUIRE(code == kExitOk);
    const auto rows = parse_csv(slurp(dir / "alpha_k.csv"));
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0] == std::vector<std::string>{"k", "alpha", "iterations"});
    CHECK(rows[1][0] == "1");
    CHECK(std::stod(rows[1][1]) == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
    const nlohmann::json m = nlohmann::json::parse(slurp(dir / "alpha_k_manifest.json"));
    CHECK(m.at("subcommand").get<std::string>() == "alpha-k");
    CHECK(m.at("artifacts")[0].at("sha256").get<std::string>() ==
          sha256_file(dir / "alpha_k.csv"));
    fs::remove_all(dir);
}

TEST_CASE("tetris-eval reruns are byte-identical and S matches the library") {
    const fs::path dir = make_temp_dir("tetris_in");
    const fs::path input = dir / "tuple.csv";
    {
        std::ofstream in(input, std::ios::binary);
        in << "s,g1,g2\n";
        const std::size_t mesh = 64;
        for (std::size_t j = 0; j <= mesh; ++j) {
            const double s = 2.0 * static_cast<double>(j) / static_cast<double>(mesh);
            in << format_double(s) << "," << format_double(s * s) << ","
               << format_double(1.0 - s) << "\n";
        }
    }
    const fs::path out1 = make_temp_dir("tetris_a");
    const fs::path out2 = make_temp_dir("tetris_b");
    REQUIRE(run_cli({"tetris-eval", "--input", input.string(), "--out", out1.string()}) ==
            kExitOk);
    REQUIRE(run_cli({"tetris-eval", "--input", input.string(), "--out", out2.string()}) ==
            kExitOk);
    CHECK(sha256_file(out1 / "tetris_eval_tuple.csv") ==
          sha256_file(out2 / "tetris_eval_tuple.csv"));
    CHECK(sha256_file(out1 / "tetris_eval_summary.csv") ==
          sha256_file(out2 / "tetris_eval_summary.csv"));

    FunctionTuple f;
    f.push_back(GridFunction::sampled(0.0, 2.0, 64, [](double s) { return s * s; }));
    f.push_back(GridFunction::sampled(0.0, 2.0, 64, [](double s) { return 1.0 - s; }));
    const double want_s = s_functional(f);
    const auto rows = parse_csv(slurp(out1 / "tetris_eval_summary.csv"));
    REQUIRE(rows.back()[0] == "s_functional");
    CHECK(std::stod(rows.back()[1]) == doctest::Approx(want_s).epsilon(1e-12));
    fs::remove_all(dir);
    fs::remove_all(out1);
    fs::remove_all(out2);
}

TEST_CASE("usage errors exit with code 2 and help with 0") {
    StreamSilencer quiet;
    CHECK(run_cli({"--help"}) == kExitOk);
    CHECK(run_cli({"no-such-subcommand"}) == kExitUsage);
    CHECK(run_cli({"alpha-k", "--no-such-flag"}) == kExitUsage);
    CHECK(run_cli({"alpha-k", "--k", "9"}) == kExitUsage);
    CHECK(run_cli({"tetris-eval", "--input", "/no/such/file.csv"}) == kExitUsage);
    CHECK(run_cli(std::vector<std::string>{}) == kExitUsage);
}

TEST_CASE("config files load, flags override, and unknown keys are rejected") {
    const fs::path dir = make_temp_dir("config");
    {
        std::ofstream cfg(dir / "good.json");
        cfg << R"({"k": 2, "out": ")" << dir.string() << R"("})";
    }
    REQUIRE(run_cli({"alpha-k", "--config", (dir / "good.json").string()}) == kExitOk);
    auto rows = parse_csv(slurp(dir / "alpha_k.csv"));
    CHECK(rows[1][0] == "2");

    // a flag beats the config value for the same key
    REQUIRE(run_cli({"alpha-k", "--config", (dir / "good.json").string(), "--k", "3"}) ==
            kExitOk);
    rows = parse_csv(slurp(dir / "alpha_k.csv"));
    CHECK(rows[1][0] == "3");

    StreamSilencer quiet;
    {
        std::ofstream cfg(dir / "bad_key.json");
        cfg << R"({"mystery": 1})";
    }
    CHECK(run_cli({"alpha-k", "--config", (dir / "bad_key.json").string()}) == kExitUsage);
    {
        std::ofstream cfg(dir / "not_json.json");
        cfg << "not json at all";
    }
    CHECK(run_cli({"alpha-k", "--config", (dir / "not_json.json").string()}) == kExitUsage);
    CHECK(run_cli({"alpha-k", "--config", (dir / "missing.json").string()}) == kExitUsage);
    fs::remove_all(dir);
}
