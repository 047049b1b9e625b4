#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testutil {

/// Fresh, empty directory under the test scratch root.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* root = std::getenv("NEURALIGN_TMP");
    std::filesystem::path base = root ? root : std::filesystem::temp_directory_path() / "neuralign_tests";
    auto dir = base / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    f << text;
}

}  // namespace testutil
