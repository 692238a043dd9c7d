#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace drift {

// Reads a whole file; throws IoError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes atomically: the content goes to a temp file in the same directory
// which is then renamed over the target, so interrupted stages never leave
// torn outputs.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

// Calls fn(line, line_number) for every line; line numbers start at 1.
// Blank lines are skipped. Throws IoError if the file cannot be opened.
void for_each_line(const std::filesystem::path& path,
                   const std::function<void(const std::string&, std::size_t)>& fn);

// 64-bit FNV-1a of the file content, hex encoded. Used for stage completion
// markers, not for security.
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace drift
