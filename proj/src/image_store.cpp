#include "curator/image_store.hpp"

#include <zlib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <sstream>
#include <thread>

#include "curator/errors.hpp"
#include "curator/hashing.hpp"

namespace curator {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint32_t be32(std::span<const unsigned char> b, std::size_t at) {
    return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
           (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

std::uint16_t be16(std::span<const unsigned char> b, std::size_t at) {
    return static_cast<std::uint16_t>((b[at] << 8) | b[at + 1]);
}

void put_be32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

void put_chunk(Bytes& out, const char type[4], std::span<const unsigned char> data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

ImageDims png_dims(std::span<const unsigned char> b) {
    if (b.size() < 24) throw ValidationError("truncated PNG header");
    return {static_cast<int>(be32(b, 16)), static_cast<int>(be32(b, 20))};
}

ImageDims jpeg_dims(std::span<const unsigned char> b) {
    std::size_t i = 2;
    while (i + 4 <= b.size()) {
        if (b[i] != 0xFF) {
            ++i;
            continue;
        }
        const unsigned char marker = b[i + 1];
        if (marker == 0xFF) {
            ++i;
            continue;
        }
        if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
            i += 2;
            continue;
        }
        const std::size_t seg_len = be16(b, i + 2);
        const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 &&
                         marker != 0xCC;
        if (sof) {
            if (i + 9 > b.size()) break;
            return {static_cast<int>(be16(b, i + 7)), static_cast<int>(be16(b, i + 5))};
        }
        i += 2 + seg_len;
    }
    throw ValidationError("JPEG without a frame header");
}

ImageDims ppm_dims(std::span<const unsigned char> b) {
    std::size_t i = 2;
    auto skip = [&] {
        while (i < b.size()) {
            if (std::isspace(b[i])) {
                ++i;
            } else if (b[i] == '#') {
                while (i < b.size() && b[i] != '\n') ++i;
            } else {
                break;
            }
        }
    };
    auto number = [&] {
        skip();
        long v = 0;
        bool any = false;
        while (i < b.size() && std::isdigit(b[i])) {
            v = v * 10 + (b[i++] - '0');
            any = true;
            if (v > 1'000'000) throw ValidationError("PPM dimension too large");
        }
        if (!any) throw ValidationError("malformed PPM header");
        return static_cast<int>(v);
    };
    const int w = number();
    const int h = number();
    return {w, h};
}

bool is_image_id(const std::string& id) {
    return id.size() == 16 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(c) && !std::isupper(c); });
}

}  // namespace

std::string sniff_image_format(std::span<const unsigned char> b) {
    static constexpr unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (b.size() >= 8 && std::equal(png_sig, png_sig + 8, b.begin())) return "png";
    if (b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF) return "jpg";
    if (b.size() >= 2 && b[0] == 'P' && (b[1] == '6' || b[1] == '3')) return "ppm";
    return {};
}

ImageDims read_image_dims(std::span<const unsigned char> bytes) {
    const std::string fmt = sniff_image_format(bytes);
    ImageDims d;
    if (fmt == "png") {
        d = png_dims(bytes);
    } else if (fmt == "jpg") {
        d = jpeg_dims(bytes);
    } else if (fmt == "ppm") {
        d = ppm_dims(bytes);
    } else {
        throw ValidationError("unsupported image format");
    }
    validate(d);
    return d;
}

Bytes encode_png_rgb(int width, int height, std::span<const unsigned char> rgb) {
    validate(ImageDims{width, height});
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    if (rgb.size() != stride * static_cast<std::size_t>(height))
        throw ValidationError("RGB buffer size does not match dims");

    Bytes raw;
    raw.reserve((stride + 1) * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        const auto row = rgb.subspan(static_cast<std::size_t>(y) * stride, stride);
        raw.insert(raw.end(), row.begin(), row.end());
    }
    uLongf packed_len = compressBound(static_cast<uLong>(raw.size()));
    Bytes packed(packed_len);
    if (compress2(packed.data(), &packed_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("zlib compression failed");
    packed.resize(packed_len);

    Bytes out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    Bytes ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", packed);
    put_chunk(out, "IEND", {});
    return out;
}

Bytes read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const fs::path& p, std::span<const unsigned char> bytes) {
    static std::atomic<unsigned> counter{0};
    std::ostringstream suffix;
    suffix << ".tmp." << std::this_thread::get_id() << "." << counter++;
    const fs::path tmp = p.string() + suffix.str();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + p.string() + ": " + ec.message());
}

void write_text_atomic(const fs::path& p, const std::string& text) {
    write_file_atomic(p, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

ImageStore::ImageStore(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw IoError("cannot create image store at " + root_.string() + ": " + ec.message());
}

fs::path ImageStore::sidecar_path(const std::string& id) const { return root_ / (id + ".json"); }

fs::path ImageStore::image_path(const std::string& id) const {
    return root_ / (id + "." + metadata(id).at("format").get<std::string>());
}

std::string ImageStore::put(std::span<const unsigned char> bytes, const json& provenance) {
    const std::string fmt = sniff_image_format(bytes);
    if (fmt.empty()) throw ValidationError("refusing to store bytes that are not an image");
    const ImageDims d = read_image_dims(bytes);
    const std::string id = to_hex(fnv1a64(bytes));

    std::lock_guard lock(mu_);
    if (meta_cache_.count(id) || fs::exists(sidecar_path(id))) return id;
    write_file_atomic(root_ / (id + "." + fmt), bytes);
    json meta = {{"id", id}, {"format", fmt}, {"width", d.width}, {"height", d.height}};
    if (!provenance.empty()) meta["provenance"] = provenance;
    write_text_atomic(sidecar_path(id), meta.dump(2));
    meta_cache_[id] = std::move(meta);
    return id;
}

bool ImageStore::contains(const std::string& id) const {
    if (!is_image_id(id)) return false;
    std::lock_guard lock(mu_);
    return meta_cache_.count(id) || fs::exists(sidecar_path(id));
}

json ImageStore::metadata(const std::string& id) const {
    if (!is_image_id(id)) throw NotFoundError("unknown image " + id);
    std::lock_guard lock(mu_);
    if (auto it = meta_cache_.find(id); it != meta_cache_.end()) return it->second;
    const fs::path p = sidecar_path(id);
    if (!fs::exists(p)) throw NotFoundError("unknown image " + id);
    std::ifstream in(p);
    json meta = json::parse(in);
    meta_cache_[id] = meta;
    return meta;
}

ImageDims ImageStore::dims(const std::string& id) const {
    const json meta = metadata(id);
    return {meta.at("width").get<int>(), meta.at("height").get<int>()};
}

Bytes ImageStore::read(const std::string& id) const { return read_file(image_path(id)); }

}  // namespace curator
