#pragma once

#include <filesystem>

#ifndef COURTSIM_SOURCE_DIR
#error "COURTSIM_SOURCE_DIR must be defined by the build"
#endif

inline std::filesystem::path source_path(const char* rel) { return std::filesystem::path(COURTSIM_SOURCE_DIR) / rel; }

// Fresh scratch directory under the system temp directory.
inline std::filesystem::path scratch_dir(const char* name) {
    auto dir = std::filesystem::temp_directory_path() / "courtsim-tests" / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}
