#pragma once

#include <filesystem>
#include <string>

namespace itokit::io {

// Creates the directory (and parents) if needed and returns the joined path.
std::filesystem::path ensure_dir(const std::filesystem::path& dir);
std::filesystem::path join(const std::filesystem::path& dir,
                           const std::string& name);

// Writes text atomically enough for our purposes (truncate + write).
void write_text(const std::filesystem::path& path, const std::string& text);

} // namespace itokit::io
