#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kopa/cli.hpp"
#include "kopa/imaging.hpp"

namespace {

const std::filesystem::path kData = KOPA_TEST_DATA_DIR;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "kopa");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = kopa::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("kopa_cli_" + name);
}

std::string small_image() {
  const auto path = tmp("small.pgm");
  kopa::GrayImage img;
  img.width = 16;
  img.height = 8;
  for (std::size_t i = 0; i < 128; ++i) img.pixels.push_back(static_cast<double>((i * 37) % 101) / 100);
  kopa::save_image(path, img);
  return path.string();
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == kopa::kExitUsage);
  CHECK(run({"bogus"}).code == kopa::kExitUsage);
  CHECK(run({"--help"}).code == kopa::kExitOk);
  CHECK(run({"select"}).code == kopa::kExitUsage);
  CHECK(run({"--kappa", "1", "--criterion", "aic", "select", "--input", "x"}).code == kopa::kExitUsage);
  CHECK(run({"--criterion", "hqc", "select", "--input", "x"}).code == kopa::kExitUsage);
  CHECK(run({"--tol", "-1", "select", "--input", small_image()}).code == kopa::kExitUsage);
}

TEST_CASE("input errors") {
  CHECK(run({"select", "--input", tmp("absent.pgm").string()}).code == kopa::kExitInput);
  const auto bad = tmp("bad.pgm");
  std::ofstream(bad) << "P5\n4 4\n255\nxx";
  const auto r = run({"select", "--input", bad.string()});
  CHECK(r.code == kopa::kExitInput);
  CHECK(r.err.find("truncated") != std::string::npos);
  CHECK(run({"fit", "--input", small_image(), "--config", "9,9"}).code == kopa::kExitUsage);
  CHECK(run({"fit", "--input", small_image(), "--config", "nope"}).code == kopa::kExitUsage);
}

TEST_CASE("select writes JSON, CSV and a heatmap") {
  const std::string img = small_image();
  auto r = run({"--criterion", "aic", "select", "--input", img});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("\"chosen\"") != std::string::npos);
  const auto csv = tmp("scan.csv"), heat = tmp("heat.csv");
  r = run({"--kappa", "2", "--out", csv.string(), "select", "--input", img, "--heatmap", heat.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("chosen ", 0) == 0);
  CHECK(slurp(csv).rfind("m,n,eta,", 0) == 0);
  CHECK(slurp(heat) == slurp(csv));
}

TEST_CASE("fit, denoise and curve") {
  const std::string img = small_image();
  const auto model = tmp("model.json"), recon = tmp("recon.pgm");
  auto r = run({"--out", model.string(), "fit", "--input", img, "--config", "1,2", "--terms", "2",
                "--recon", recon.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("variance_explained") != std::string::npos);
  CHECK(slurp(model).find("\"vec(A)\"") != std::string::npos);
  CHECK(kopa::load_image(recon).width == 16);

  const auto den = tmp("den.pgm"), noisy = tmp("noisy.pgm");
  r = run({"--seed", "3", "--out", den.string(), "denoise", "--input", img, "--sigma", "0.1",
           "--noisy", noisy.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("reconstruction_error") != std::string::npos);
  CHECK(std::filesystem::exists(noisy));

  r = run({"curve", "--input", img});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("method,detail,params,ratio\n", 0) == 0);
}

TEST_CASE("sim runs a spec") {
  const auto spec = tmp("spec.json"), agg = tmp("agg.csv");
  std::ofstream(spec) << R"({"kind": "select-one-term", "M": 3, "N": 3, "m0": 1, "n0": 2,
    "lambda_grid": [5.0], "sigma": 1, "reps": 2, "kappa": "aic", "base_seed": 1})";
  auto r = run({"sim", "--spec", spec.string(), "--aggregate", agg.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("grid_value,rep,outcome", 0) == 0);
  CHECK(slurp(agg).find("\n,5,2,2,1") != std::string::npos);  // no secondary value
  std::ofstream(spec) << R"({"kind": "select-one-term", "M": 3})";
  CHECK(run({"sim", "--spec", spec.string()}).code == kopa::kExitInput);
}

TEST_CASE("threads from the environment") {
  setenv("KOPA_THREADS", "x", 1);
  CHECK(run({"select", "--input", small_image()}).code == kopa::kExitUsage);
  setenv("KOPA_THREADS", "2", 1);
  CHECK(run({"select", "--input", small_image()}).code == kopa::kExitOk);
  unsetenv("KOPA_THREADS");
}

TEST_CASE("cameraman fit at 4,5") {
  const auto path = kData / "cameraman.pgm";
  if (!std::filesystem::exists(path)) return;
  const auto r = run({"fit", "--input", path.string(), "--config", "4,5", "--out", tmp("cm.json").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("variance_explained 0.775") != std::string::npos);
}
