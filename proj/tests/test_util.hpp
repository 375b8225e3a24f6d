#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "curator/image_store.hpp"

namespace curator::test_util {

/// Empty scratch directory unique to this process and name.
inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() /
                   ("curator-test-" + std::to_string(::getpid()) + "-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline Bytes flat_png(int w, int h, unsigned char shade) {
    std::vector<unsigned char> rgb(static_cast<std::size_t>(w) * h * 3, shade);
    return encode_png_rgb(w, h, rgb);
}

}  // namespace curator::test_util
