#pragma once

#include "laminar/common.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace laminar::io {

// Writes to a sibling temporary file and renames it into place, so readers
// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::vector<unsigned char> read_file(const std::filesystem::path& path);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
std::string to_csv(const CsvTable& table);

// Point cloud CSV: header x1..xd with an optional trailing "label" column.
PointCloud read_point_cloud_csv(const std::filesystem::path& path);
std::string point_cloud_to_csv(const PointCloud& cloud);

std::string labels_to_csv(std::span<const int> labels, std::string_view column = "label");
std::vector<int> read_labels_csv(const std::filesystem::path& path, std::string_view column = "label");

// Little-endian binary helpers.
class ByteWriter {
 public:
  void bytes(std::span<const unsigned char> data) { buf_.insert(buf_.end(), data.begin(), data.end()); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void f64s(std::span<const double> values) {
    for (double v : values) f64(v);
  }
  std::vector<unsigned char> take() { return std::move(buf_); }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> data) : data_(data) {}
  std::span<const unsigned char> bytes(std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  std::span<const unsigned char> data_;
  std::size_t pos_ = 0;
};

}  // namespace laminar::io
