#include "itokit/io.hpp"

#include "itokit/errors.hpp"

#include <fstream>

namespace itokit::io {

std::filesystem::path ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw ConfigError("cannot create output directory '" + dir.string() +
                          "': " + ec.message());
    return dir;
}

std::filesystem::path join(const std::filesystem::path& dir,
                           const std::string& name) {
    return dir / name;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os)
        throw ConfigError("cannot open '" + path.string() + "' for writing");
    os << text;
}

} // namespace itokit::io
