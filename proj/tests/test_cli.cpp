#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

#include "fnode/io.hpp"

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Sandbox {
  fs::path dir;
  Sandbox() {
    dir = fs::temp_directory_path() / ("fnode_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Sandbox() { fs::remove_all(dir); }
  std::string operator/(const std::string& name) const { return (dir / name).string(); }
  void write(const std::string& name, const std::string& text) const { std::ofstream(dir / name) << text; }
};

int run(const std::string& args, const Sandbox& box) {
  const std::string cmd = std::string(FNODE_CLI_PATH) + " " + args + " > " + (box / "stdout.txt") + " 2> " +
                          (box / "stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string first_line(const std::string& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_CASE("cli usage and configuration errors exit with 2") {
  Sandbox box;
  CHECK(run("", box) == 2);
  CHECK(run("frobnicate", box) == 2);
  box.write("bad.cfg", "benchmark = pendulum\n");
  CHECK(run("generate -c " + (box / "bad.cfg") + " -o " + (box / "x.csv"), box) == 2);
  CHECK(slurp(box / "stderr.txt").find("benchmark") != std::string::npos);
  CHECK_FALSE(fs::exists(box / "x.csv"));
  box.write("neg.cfg", "benchmark = smsd\ndt = -0.01\n");
  CHECK(run("generate -c " + (box / "neg.cfg"), box) == 2);
  CHECK(run("generate -c " + (box / "missing.cfg"), box) == 2);
}

TEST_CASE("cli generate, eval and mismatched checkpoints") {
  Sandbox box;
  box.write("s.cfg", "benchmark = smsd\ntrain_steps = 60\ntest_steps = 20\nepochs = 2\nwidth = 8\n");
  REQUIRE(run("generate -c " + (box / "s.cfg") + " -o " + (box / "s.csv"), box) == 0);
  CHECK(first_line(box / "s.csv") == "t,q0,v0,a0");

  REQUIRE(run("eval -c " + (box / "s.cfg") + " -p " + (box / "s.csv") + " -t " + (box / "s.csv"), box) == 0);
  const std::string out = slurp(box / "stdout.txt");
  CHECK(out.find("mse_total,mse_train_window,mse_test_window\n0,0,0") != std::string::npos);

  REQUIRE(run("train -c " + (box / "s.cfg") + " -d " + (box / "s.csv") + " -o " + (box / "s.ckpt"), box) == 0);
  CHECK(slurp(box / "stdout.txt").find("solver calls     0") != std::string::npos);
  CHECK(fs::exists(box / "s_loss.csv"));
  REQUIRE(run("rollout -c " + (box / "s.cfg") + " -m " + (box / "s.ckpt") + " -i " + (box / "s.csv") + " -o " +
                  (box / "p.csv"),
              box) == 0);
  CHECK(first_line(box / "p.csv") == "t,q0,v0");

  box.write("t.cfg", "benchmark = tmsd\ntrain_steps = 20\ntest_steps = 5\n");
  REQUIRE(run("generate -c " + (box / "t.cfg") + " -o " + (box / "t.csv"), box) == 0);
  CHECK(run("rollout -c " + (box / "t.cfg") + " -m " + (box / "s.ckpt") + " -i " + (box / "t.csv"), box) == 2);

  box.write("ragged.csv", "t,q0,v0\n0,1,2\n0.01,1\n");
  CHECK(run("eval -c " + (box / "s.cfg") + " -p " + (box / "ragged.csv") + " -t " + (box / "s.csv"), box) == 2);
  CHECK(slurp(box / "stderr.txt").find("line 3") != std::string::npos);
}

TEST_CASE("cli output is byte-identical across runs") {
  Sandbox box;
  box.write("s.cfg", "benchmark = smsd\ntrain_steps = 40\ntest_steps = 10\nepochs = 3\nwidth = 8\n");
  for (const char* name : {"a", "b"}) {
    const std::string n(name);
    REQUIRE(run("generate -c " + (box / "s.cfg") + " -o " + (box / (n + ".csv")), box) == 0);
    REQUIRE(run("train -c " + (box / "s.cfg") + " -d " + (box / (n + ".csv")) + " -o " + (box / (n + ".ckpt")), box) ==
            0);
  }
  CHECK(slurp(box / "a.csv") == slurp(box / "b.csv"));
  CHECK(slurp(box / "a.ckpt") == slurp(box / "b.ckpt"));
  CHECK(slurp(box / "a_loss.csv") == slurp(box / "b_loss.csv"));
}

TEST_CASE("cli mpc from rest and schema agreement") {
  Sandbox box;
  box.write("c.cfg",
            "benchmark = cartpole\nepochs = 2\nwidth = 8\nepisodes = 2\nepisode_steps = 40\n"
            "mpc_steps = 30\nmpc_initial_state = 0, 0, 0, 0\nhorizon = 10\n");
  REQUIRE(run("generate -c " + (box / "c.cfg") + " -o " + (box / "c.csv"), box) == 0);
  REQUIRE(run("mpc -c " + (box / "c.cfg") + " --analytic -o " + (box / "analytic.csv"), box) == 0);
  std::ifstream in(box / "analytic.csv");
  const auto traj_text = slurp(box / "analytic.csv");
  CHECK(first_line(box / "analytic.csv") == "t,theta,x,omega,v,u");
  std::istringstream rows(traj_text);
  std::string line;
  std::getline(rows, line);
  int count = 0;
  while (std::getline(rows, line)) {
    const double u = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(std::abs(u) < 1e-12);
    ++count;
  }
  CHECK(count == 31);

  REQUIRE(run("train -c " + (box / "c.cfg") + " -d " + (box / "c.csv") + " -o " + (box / "c.ckpt"), box) == 0);
  REQUIRE(run("mpc -c " + (box / "c.cfg") + " -m " + (box / "c.ckpt") + " -o " + (box / "learned.csv"), box) == 0);
  CHECK(first_line(box / "learned.csv") == first_line(box / "analytic.csv"));
  CHECK(run("mpc -c " + (box / "c.cfg") + " -o " + (box / "none.csv"), box) == 2);
}

TEST_CASE("cli verify passes") {
  Sandbox box;
  CHECK(run("verify", box) == 0);
  const std::string out = slurp(box / "stdout.txt");
  CHECK(out.find("FAIL") == std::string::npos);
  CHECK(out.find("PASS") != std::string::npos);
}
