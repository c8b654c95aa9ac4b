#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {
const fs::path scratch = fs::temp_directory_path() / "hkb_cli_tests";

int run(const std::string& args, const fs::path& err = scratch / "stderr.txt") {
  fs::create_directories(scratch);
  const std::string cmd = std::string(HKB_CLI) + " " + args + " > " + (scratch / "stdout.txt").string() + " 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write_ini(const std::string& name, const std::string& text) {
  fs::create_directories(scratch);
  const auto p = scratch / name;
  std::ofstream(p) << text;
  return p;
}
}  // namespace

TEST_CASE("all on ou passes, reports every stage and reruns byte for byte") {
  const auto out = scratch / "ou_a";
  fs::remove_all(out);
  REQUIRE(run("all --config ou --out " + out.string()) == 0);
  for (const char* stage : {"hypothesis", "lyapunov", "spi", "kernel", "mc"}) {
    CAPTURE(stage);
    const auto path = out / (std::string(stage) + ".json");
    REQUIRE(fs::exists(path));
    const auto j = nlohmann::json::parse(slurp(path));
    CHECK(j.at("config_hash").get<std::string>().size() == 16);
    CHECK(j.at("tolerances").is_object());
    CHECK(j.at("pass").get<bool>());
  }
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary.at("pass").get<bool>());

  const auto again = scratch / "ou_b";
  fs::remove_all(again);
  REQUIRE(run("all --config ou --out " + again.string()) == 0);
  for (const auto& entry : fs::directory_iterator(out)) {
    CAPTURE(entry.path().filename().string());
    CHECK(slurp(entry.path()) == slurp(again / entry.path().filename()));
  }
}

TEST_CASE("spi on the alpha = 3 preset writes a monotone empirical column") {
  const auto out = scratch / "alpha3";
  fs::remove_all(out);
  REQUIRE(run("spi --config subexp_alpha3 --out " + out.string()) == 0);
  std::ifstream csv(out / "spi.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "s,b_theory,b_empirical,ratio");
  double prev = 1e300;
  int rows = 0;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    std::getline(ss, cell, ',');
    const double b = std::stod(cell);
    CHECK(b <= prev);
    prev = b;
    ++rows;
  }
  CHECK(rows >= 7);
}

TEST_CASE("configuration problems exit with 2") {
  const auto ini = write_ini("bad_gamma.ini", "[hypothesis]\nalpha = 0.5\n[lyapunov]\ngamma = 0\n");
  const auto err = scratch / "bad_gamma.err";
  CHECK(run("lyapunov --config " + ini.string() + " --out " + (scratch / "bad").string(), err) == 2);
  CHECK(slurp(err).find("gamma > 1 - alpha") != std::string::npos);

  CHECK(run("all --config no_such_preset") == 2);
  CHECK(run("all --config ou --tol-scale 0") == 2);
  CHECK(run("all --no-such-flag") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("numerical failures exit with 1") {
  // R = 3 cuts off more than the allowed Gaussian mass.
  std::string text = slurp(fs::path(HKB_PRESET_DIR) / "ou.ini");
  const auto at = text.find("R = 6");
  REQUIRE(at != std::string::npos);
  text.replace(at, 5, "R = 3");
  const auto ini = write_ini("ou_r3.ini", text);
  const auto err = scratch / "r3.err";
  CHECK(run("kernel --config " + ini.string() + " --out " + (scratch / "r3").string(), err) == 1);
  CHECK(slurp(err).find("error") != std::string::npos);
}
