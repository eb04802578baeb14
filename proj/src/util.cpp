#include "simobj/util.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "simobj/error.hpp"

namespace simobj {

namespace {

std::string fmt_g(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

}  // namespace

std::string fmt_full(double v) {
  // Shortest form that round-trips.
  for (int p = 1; p <= 17; ++p) {
    std::string s = fmt_g(v, p);
    if (std::stod(s) == v) return s;
  }
  return fmt_g(v, 17);
}

std::string fmt_display(double v) { return fmt_g(v, 4); }

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path.string() + ": file not found");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError(path.string() + ": cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ValidationError(path.string() + ": write failed");
}

}  // namespace simobj
