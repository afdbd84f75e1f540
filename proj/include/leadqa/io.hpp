#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace leadqa {

/// Hex-encoded SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

/// Hex-encoded SHA-256 of a file's contents. Throws missing_upstream_error if
/// the file does not exist.
std::string sha256_file_hex(const std::filesystem::path& path);

/// Whole-file read; throws missing_upstream_error when absent.
std::string read_file(const std::filesystem::path& path);

/// Write via a unique temp file in the same directory followed by an atomic
/// rename, so concurrent writers and crashed runs never leave partial files.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

/// Calls fn(line_number, line) for each line of a JSON-Lines file, skipping
/// blank lines. Line numbers are 1-based.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(std::size_t, const std::string&)>& fn);

} // namespace leadqa
