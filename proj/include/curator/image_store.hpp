#pragma once

#include <filesystem>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "curator/geometry.hpp"

namespace curator {

using Bytes = std::vector<unsigned char>;

/// "png", "jpg" or "ppm" from the leading magic bytes; empty if unknown.
std::string sniff_image_format(std::span<const unsigned char> bytes);

/// Width/height from a PNG, baseline/progressive JPEG or binary/ASCII PPM
/// header. Throws ValidationError for anything else.
ImageDims read_image_dims(std::span<const unsigned char> bytes);

/// 8-bit RGB PNG, deterministic for identical input.
Bytes encode_png_rgb(int width, int height, std::span<const unsigned char> rgb);

Bytes read_file(const std::filesystem::path& p);
/// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& p, std::span<const unsigned char> bytes);
void write_text_atomic(const std::filesystem::path& p, const std::string& text);

/// Content-addressed image directory shared by the engine and its backends.
/// Each image `<id>.<ext>` has a `<id>.json` sidecar with dims, format and
/// optional provenance. Ids are the hex FNV-1a hash of the bytes.
class ImageStore {
public:
    explicit ImageStore(std::filesystem::path root);

    const std::filesystem::path& root() const noexcept { return root_; }

    /// Stores bytes (idempotent) and returns the id. Provenance, when given,
    /// is merged into the sidecar on first write.
    std::string put(std::span<const unsigned char> bytes,
                    const nlohmann::json& provenance = nlohmann::json::object());

    bool contains(const std::string& id) const;
    Bytes read(const std::string& id) const;
    ImageDims dims(const std::string& id) const;
    nlohmann::json metadata(const std::string& id) const;
    std::filesystem::path image_path(const std::string& id) const;

private:
    std::filesystem::path sidecar_path(const std::string& id) const;

    std::filesystem::path root_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::string, nlohmann::json> meta_cache_;
};

}  // namespace curator
