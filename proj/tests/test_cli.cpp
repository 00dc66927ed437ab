#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "psearch/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = psearch::cli::run(args, out, err);
  return Run{code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("psearch_test_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

// A small world shared by the tests below.
const fs::path& world() {
  static const fs::path dir = [] {
    const auto d = fresh_dir("world");
    const Run r = run({"simulate", "--seed", "7", "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("simulate writes the three inputs deterministically") {
  const auto a = fresh_dir("det_a");
  const auto b = fresh_dir("det_b");
  REQUIRE(run({"simulate", "--seed", "3", "--out", a.string()}).code == 0);
  REQUIRE(run({"simulate", "--seed", "3", "--out", b.string()}).code == 0);
  for (const char* f : {"scenes.jsonl", "features.psgf", "queries.jsonl"}) {
    CHECK(fs::exists(a / f));
    CHECK(read_bytes(a / f) == read_bytes(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("evaluate machine report") {
  const Run r1 = run({"evaluate", "--data", world().string(), "--format", "machine"});
  const Run r2 = run({"evaluate", "--data", world().string(), "--format", "machine"});
  REQUIRE(r1.code == 0);
  CHECK(r1.out == r2.out);
  const auto kv = psearch::cli::parse_report_line(r1.out);
  CHECK(kv.at("ranker") == "rcp");
  CHECK(kv.at("queries") == "30");
  CHECK(std::stod(kv.at("map")) > 0.0);

  const Run base = run({"evaluate", "--data", world().string(), "--format", "machine", "--baseline"});
  REQUIRE(base.code == 0);
  CHECK(std::stod(psearch::cli::parse_report_line(base.out).at("map")) < std::stod(kv.at("map")));

  const Run rcp0 = run({"evaluate", "--data", world().string(), "--format", "machine", "--lambda", "0"});
  CHECK(psearch::cli::parse_report_line(rcp0.out).at("map") ==
        psearch::cli::parse_report_line(base.out).at("map"));

  CHECK(run({"evaluate", "--data", world().string(), "--rcp", "--baseline"}).code != 0);
  CHECK(run({"evaluate", "--data", world().string(), "--gallery-size", "10"}).code != 0);
  const Run sub = run({"evaluate", "--data", world().string(), "--gallery-size", "20", "--seed", "2",
                       "--format", "machine"});
  CHECK(sub.code == 0);
  CHECK(psearch::cli::parse_report_line(sub.out).at("gallery") != kv.at("gallery"));
}

TEST_CASE("search with lambda 0 ranks like the baseline") {
  auto body = [](const std::string& s) {
    // Drop the score columns, keep rank..person_id.
    std::istringstream in(s);
    std::string line, out;
    while (std::getline(in, line)) {
      std::size_t pos = 0;
      for (int tabs = 0; tabs < 7 && pos != std::string::npos; ++tabs) pos = line.find('\t', pos + 1);
      out += line.substr(0, pos) + "\n";
    }
    return out;
  };
  const Run base = run({"search", "--data", world().string(), "--query", "2", "--baseline", "--topk", "15"});
  const Run zero = run({"search", "--data", world().string(), "--query", "2", "--lambda", "0", "--topk", "15"});
  REQUIRE(base.code == 0);
  REQUIRE(zero.code == 0);
  CHECK(body(base.out) == body(zero.out));
  CHECK(std::count(base.out.begin(), base.out.end(), '\n') == 16);
}

TEST_CASE("build-gallery and distill-check") {
  const Run g = run({"build-gallery", "--data", world().string()});
  CHECK(g.code == 0);
  CHECK(psearch::cli::parse_report_line(g.out).at("dim") == "64");

  const Run d = run({"distill-check", "--seed", "1"});
  CHECK(d.code == 0);
  CHECK(d.out.find("final_transfer=") != std::string::npos);
  CHECK(run({"distill-check", "--seed", "1", "--lr", "1e6"}).code == 3);
}

TEST_CASE("errors exit nonzero with a message") {
  const Run missing = run({"evaluate", "--data", "/nonexistent/psearch"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("file not found") != std::string::npos);
  CHECK(run({"frobnicate"}).code != 0);
  CHECK(run({"simulate", "--out", fresh_dir("noseed").string()}).code != 0);
  CHECK(run({"search", "--data", world().string(), "--query", "999"}).code == 1);
}

TEST_CASE("parse_report_line") {
  const auto kv = psearch::cli::parse_report_line("map=0.5 top1=1 ranker=rcp\n");
  CHECK(kv.size() == 3);
  CHECK(kv.at("top1") == "1");
}
