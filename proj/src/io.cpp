#include "nlgrad/io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace nlgrad {

namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  auto out = open_out(path);
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) out << (k ? "," : "") << cells[k];
    out << '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
}

void write_field(const std::filesystem::path& path, const Field& f) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  const std::int64_t dims[2] = {f.rows(), f.cols()};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
}

Field read_field(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::int64_t dims[2];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw std::runtime_error("cannot read " + path.string());
  Field f(dims[0], dims[1]);
  if (!in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)))) {
    throw std::runtime_error("truncated field file " + path.string());
  }
  return f;
}

void write_text(const std::filesystem::path& path, const std::string& text) { open_out(path) << text; }

}  // namespace nlgrad
