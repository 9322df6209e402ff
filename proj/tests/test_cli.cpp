#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "laminar_cli_test";

int run(const std::string& args) {
  const std::string cmd = "cd '" + kWork.string() + "' && '" LAMINAR_CLI_PATH "' " + args + " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(kWork / p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("cli end to end on a small dataset") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  REQUIRE(run("generate --kind two_moons -n 200 --seed 4 -o d.csv") == 0);
  CHECK(fs::exists(kWork / "d.json"));
  REQUIRE(run("train --data d.csv --epochs 5 -q -o m.lamflow") == 0);
  CHECK(slurp("m.loss.csv").rfind("epoch,loss\n", 0) == 0);
  REQUIRE(run("distances --data d.csv --model m.lamflow -o dist.bin") == 0);
  REQUIRE(run("cluster --distances dist.bin -k 2 --truth d.csv") == 0);
  CHECK(slurp("out.txt").find("total cost") != std::string::npos);
  CHECK(slurp("labels.csv").rfind("index,cluster\n", 0) == 0);
  REQUIRE(run("viz distance --data d.csv --distances dist.bin --query 3 --resolution 40 -o map.svg") == 0);
  CHECK(fs::exists(kWork / "map.json"));

  REQUIRE(run("distances --data d.csv --model m.lamflow -k 1 -o sparse.bin") == 0);
  CHECK(slurp("err.txt").find("components") != std::string::npos);
  fs::remove_all(kWork);
}

TEST_CASE("cli compare on a transformed disk") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);
  REQUIRE(run("generate --kind transformed_disk --transform shear -n 150 -o disk.csv") == 0);
  REQUIRE(run("train --data disk.csv --epochs 3 -q -o m.lamflow") == 0);
  REQUIRE(run("compare --data disk.csv --model m.lamflow") == 0);
  CHECK(slurp("out.txt").find("median W2") != std::string::npos);
  CHECK(run("compare --data disk.csv --model m.lamflow --spec missing.json") == 1);
  fs::remove_all(kWork);
}

TEST_CASE("cli exit codes") {
  fs::create_directories(kWork);
  CHECK(run("") == 2);
  CHECK(run("train") == 2);
  CHECK(run("generate --kind nonsense") == 1);
  CHECK(run("cluster --distances missing.bin") == 1);
  CHECK(run("viz wheel -o wheel.svg") == 0);
  CHECK(run("--help") == 0);
  fs::remove_all(kWork);
}
