#include "laminar/io.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

using namespace laminar;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) { return fs::temp_directory_path() / ("laminar_test_" + name); }

}  // namespace

TEST_CASE("doubles survive text round trips") {
  for (double v : {0.0, -0.0, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5, std::numeric_limits<double>::denorm_min()}) {
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(std::isinf(io::parse_double("inf")));
  CHECK(io::parse_double("-inf") < 0.0);
  CHECK(std::isnan(io::parse_double("nan")));
  CHECK_THROWS_AS(io::parse_double("1.5x"), InputError);
  CHECK_THROWS_AS(io::parse_double(""), InputError);
}

TEST_CASE("point cloud csv round trip with labels") {
  PointCloud c;
  c.points.resize(3, 2);
  c.points << 0.1, -2.0, 1e-9, 3.25, 1.0 / 3.0, 7.0;
  c.labels = std::vector<int>{0, 2, 1};
  const auto path = temp_file("cloud.csv");
  io::write_file_atomic(path, io::point_cloud_to_csv(c));
  const PointCloud back = io::read_point_cloud_csv(path);
  CHECK(back.points == c.points);
  CHECK(back.labels == c.labels);
  CHECK(io::read_labels_csv(path) == *c.labels);
  fs::remove(path);
  CHECK(io::point_cloud_to_csv(c).rfind("x1,x2,label\n", 0) == 0);
}

TEST_CASE("malformed csv files are rejected") {
  const auto path = temp_file("bad.csv");
  io::write_file_atomic(path, std::string("x1,x2\n1,2\n3\n"));
  CHECK_THROWS_AS(io::read_point_cloud_csv(path), InputError);
  io::write_file_atomic(path, std::string("x1,x2\n1,nan\n"));
  CHECK_THROWS_AS(io::read_point_cloud_csv(path), InputError);
  io::write_file_atomic(path, std::string(""));
  CHECK_THROWS_AS(io::read_point_cloud_csv(path), InputError);
  io::write_file_atomic(path, std::string("x1\n1\n"));
  CHECK_THROWS_AS(io::read_labels_csv(path), InputError);
  fs::remove(path);
  CHECK_THROWS_AS(io::read_point_cloud_csv(temp_file("missing.csv")), IoError);
}

TEST_CASE("atomic writes leave no temporary file behind") {
  const auto path = temp_file("atomic.txt");
  io::write_file_atomic(path, std::string("first"));
  io::write_file_atomic(path, std::string("second"));
  const auto bytes = io::read_file(path);
  CHECK(std::string(bytes.begin(), bytes.end()) == "second");
  for (const auto& e : fs::directory_iterator(fs::temp_directory_path())) {
    CHECK(e.path().filename().string().find("laminar_test_atomic.txt.") == std::string::npos);
  }
  // A regular file cannot serve as a parent directory.
  CHECK_THROWS_AS(io::write_file_atomic(path / "x.txt", std::string("x")), IoError);
  fs::remove(path);
}

TEST_CASE("binary writer and reader are little endian and bounds checked") {
  io::ByteWriter w;
  w.u32(0x01020304u);
  w.u64(5);
  w.f64(-1.5);
  const auto bytes = w.take();
  REQUIRE(bytes.size() == 20);
  CHECK(bytes[0] == 0x04);
  CHECK(bytes[3] == 0x01);
  io::ByteReader r(bytes);
  CHECK(r.u32() == 0x01020304u);
  CHECK(r.u64() == 5);
  CHECK(r.f64() == -1.5);
  CHECK(r.exhausted());
  CHECK_THROWS_AS(r.u32(), IoError);
}
