#include "curator/jsonl.hpp"

#include <fstream>
#include <iterator>

#include <fcntl.h>
#include <unistd.h>

#include "curator/errors.hpp"

namespace curator {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void fsync_dir(const fs::path& dir) {
    const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

}  // namespace

std::vector<json> read_jsonl(const fs::path& p) {
    std::vector<json> out;
    if (!fs::exists(p)) return out;
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();

    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            // Torn final write: the writer never acknowledged it.
            fs::resize_file(p, pos);
            break;
        }
        const std::string_view line(text.data() + pos, nl - pos);
        if (!line.empty()) {
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded())
                throw FormatError("corrupt line in " + p.string() + " at byte " + std::to_string(pos));
            out.push_back(std::move(j));
        }
        pos = nl + 1;
    }
    return out;
}

void append_jsonl(const fs::path& p, const json& record) {
    const std::string line = record.dump() + "\n";
    const bool created = !fs::exists(p);
    const int fd = ::open(p.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw IoError("cannot open " + p.string() + " for append");
    std::size_t done = 0;
    while (done < line.size()) {
        const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0) {
            ::close(fd);
            throw IoError("write failed on " + p.string());
        }
        done += static_cast<std::size_t>(n);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    if (rc != 0) throw IoError("fsync failed on " + p.string());
    if (created) fsync_dir(p.parent_path());
}

}  // namespace curator
