#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace simobj {

inline constexpr const char* kToolName = "simobj";
inline constexpr const char* kToolVersion = "0.1.0";

// Shortest-precision decimal forms used in CSV and markdown output; both
// are deterministic functions of the value.
std::string fmt_full(double v);     // round-trip precision (%.17g trimmed)
std::string fmt_display(double v);  // 4 significant digits

std::string fnv1a64_hex(std::string_view bytes);
std::string read_file(const std::filesystem::path& path);          // throws ValidationError
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace simobj
