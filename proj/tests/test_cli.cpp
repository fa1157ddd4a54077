#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mestereo/cli.hpp"
#include "mestereo/duonet.hpp"
#include "mestereo/image_io.hpp"

using namespace mestereo;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  const fs::path dir = fs::path(MESTEREO_TEST_TMP);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mestereo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return std::string(std::istreambuf_iterator<char>(f), {});
}

// Two exposures and matching disparities on disk.
void write_stack(const fs::path& dir) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f), d(5.0f, 40.0f);
  for (int k = 0; k < 2; ++k) {
    ImageF img(24, 20, 3);
    for (float& v : img.data()) v = u(rng);
    write_image(dir / ("left" + std::to_string(k) + ".png"), img);
    std::vector<float> disp(24 * 20);
    for (float& v : disp) v = d(rng);
    write_pfm(dir / ("disp" + std::to_string(k) + ".pfm"), DisparityMap(24, 20, disp));
  }
}

}  // namespace

TEST_CASE("fuse writes the refined map, preview and weights") {
  const fs::path dir = tmp_dir() / "fuse";
  fs::create_directories(dir);
  write_stack(dir);
  const Run r = run({"fuse", "--left", (dir / "left0.png").string(), "--left", (dir / "left1.png").string(), "--disp",
                     (dir / "disp0.pfm").string(), "--disp", (dir / "disp1.pfm").string(), "--out",
                     (dir / "fused.pfm").string(), "--levels", "2"});
  CAPTURE(r.err);
  REQUIRE(r.code == cli::kExitOk);
  CHECK(fs::exists(dir / "fused.pfm"));
  CHECK(fs::exists(dir / "fused_preview.png"));
  CHECK(fs::exists(dir / "fused_weight0.png"));
  CHECK(fs::exists(dir / "fused_weight1.png"));
  CHECK(r.err.find("resolved config") != std::string::npos);
  CHECK(r.out.find("2-level pyramid") != std::string::npos);
  CHECK(read_pfm(dir / "fused.pfm").height() == 24);
}

TEST_CASE("fuse rejects mismatched counts") {
  const Run r = run({"fuse", "--left", "a.png", "--left", "b.png", "--disp", "a.pfm", "--out", "x.pfm"});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("expected equal counts") != std::string::npos);
}

TEST_CASE("missing inputs are I/O failures") {
  const Run r = run({"fuse", "--left", "/nonexistent/a.png", "--disp", "/nonexistent/a.pfm", "--out",
                     (tmp_dir() / "never.pfm").string()});
  CHECK(r.code == cli::kExitIo);
  CHECK(run({"--config", "/nonexistent/cfg.json", "convert", "--disp", "a.pfm", "--baseline", "1", "--focal", "1",
             "--out", "b.pfm"})
            .code == cli::kExitIo);
}

TEST_CASE("bad parameters are validation failures") {
  CHECK(run({}).code == cli::kExitValidation);
  CHECK(run({"fuse", "--wc", "abc"}).code == cli::kExitValidation);
  CHECK(run({"eval", "--pred", "a.pfm", "--gt", "b.pfm", "--baseline", "1"}).code == cli::kExitValidation);
  CHECK(run({"eval", "--pred", "a.pfm", "--gt", "b.pfm", "--log-base", "2"}).code == cli::kExitValidation);
  CHECK(run({"toy-train", "--samples", "0"}).code == cli::kExitValidation);
  CHECK(run({"toy-train", "--samples", "1", "--size", "16", "--shift", "9"}).code == cli::kExitValidation);
  CHECK(run({"convert", "--disp", "a.pfm", "--baseline", "0", "--focal", "700", "--out", "b.pfm"}).code ==
        cli::kExitValidation);
}

TEST_CASE("convert turns 84 px into 1 m") {
  const fs::path dir = tmp_dir() / "convert";
  fs::create_directories(dir);
  write_pfm(dir / "d.pfm", DisparityMap(1, 2, {84.0f, 0.0f}));
  const Run r = run({"convert", "--disp", (dir / "d.pfm").string(), "--baseline", "0.12", "--focal", "700", "--out",
                     (dir / "z.pfm").string()});
  REQUIRE(r.code == cli::kExitOk);
  const DisparityMap z = read_pfm(dir / "z.pfm");
  CHECK(z.at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(z.at(0, 1) == 0.0f);
}

TEST_CASE("eval writes a CSV report") {
  const fs::path dir = tmp_dir() / "eval";
  fs::create_directories(dir);
  write_pfm(dir / "p.pfm", DisparityMap(1, 3, {2.0f, 4.0f, 6.0f}));
  write_pfm(dir / "g.pfm", DisparityMap(1, 3, {2.0f, 4.0f, 6.0f}));
  const Run r = run({"eval", "--pred", (dir / "p.pfm").string(), "--gt", (dir / "g.pfm").string(), "--out",
                     (dir / "m.csv").string()});
  REQUIRE(r.code == cli::kExitOk);
  const std::string csv = slurp(dir / "m.csv");
  CHECK(csv.rfind("abs_rel,", 0) == 0);
  CHECK(csv.find("\n0,0,0,0,1,1,1,") != std::string::npos);
  CHECK(r.out.find("disparity") != std::string::npos);

  const Run depth = run({"eval", "--pred", (dir / "p.pfm").string(), "--gt", (dir / "g.pfm").string(), "--baseline",
                         "0.1", "--focal", "500"});
  CHECK(depth.code == cli::kExitOk);
  CHECK(depth.out.find("depth") != std::string::npos);
}

TEST_CASE("toy-train is deterministic and saves its outputs") {
  const fs::path dir = tmp_dir() / "train";
  fs::create_directories(dir);
  const auto go = [&](const std::string& tag) {
    return run({"toy-train", "--seed", "3", "--epochs", "2", "--samples", "4", "--size", "16", "--shift", "2",
                "--curve", (dir / (tag + ".csv")).string(), "--out", (dir / (tag + ".bin")).string()});
  };
  REQUIRE(go("a").code == cli::kExitOk);
  REQUIRE(go("b").code == cli::kExitOk);
  const std::string a = slurp(dir / "a.csv");
  CHECK(a == slurp(dir / "b.csv"));
  CHECK(a.rfind("epoch,mean_l1_loss\n", 0) == 0);
  const auto net = duonet::load_net(dir / "a.bin");
  CHECK(net.seed == 3);
}

TEST_CASE("config file supplies defaults and flags override it") {
  const fs::path dir = tmp_dir() / "config";
  fs::create_directories(dir);
  write_pfm(dir / "d.pfm", DisparityMap(1, 1, {84.0f}));
  {
    std::ofstream f(dir / "cfg.json");
    f << R"({"disp": ")" << (dir / "d.pfm").string() << R"(", "baseline": 0.12, "focal": 350, "out": ")"
      << (dir / "z.pfm").string() << R"("})";
  }
  Run r = run({"--config", (dir / "cfg.json").string(), "convert"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(read_pfm(dir / "z.pfm").at(0, 0) == doctest::Approx(0.5).epsilon(1e-6));
  r = run({"--config", (dir / "cfg.json").string(), "convert", "--focal", "700"});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(read_pfm(dir / "z.pfm").at(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.err.find("\"focal\":700") != std::string::npos);

  {
    std::ofstream f(dir / "bad.json");
    f << "{not json";
  }
  CHECK(run({"--config", (dir / "bad.json").string(), "convert"}).code == cli::kExitValidation);
  {
    std::ofstream f(dir / "typed.json");
    f << R"({"focal": "wide"})";
  }
  CHECK(run({"--config", (dir / "typed.json").string(), "convert"}).code == cli::kExitValidation);
}
