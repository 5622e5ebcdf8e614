#include "util.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "ebtforge/errors.hpp"

namespace ebtforge::detail {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    static std::atomic<unsigned> counter{0};
    fs::path tmp = path;
    tmp += fmt::format(".tmp{}.{}", ::getpid(), counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("cannot write " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    return fmt::format("{:016x}", v);
}

std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        out.emplace_back(line);
        pos = nl + 1;
    }
    return out;
}

std::string dedent_tail(std::string_view text) {
    auto lines = split_lines(text);
    std::size_t common = std::string_view::npos;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string& l = lines[i];
        auto first = l.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        common = std::min(common, first);
    }
    if (common == std::string_view::npos) common = 0;
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i > 0) out += '\n';
        std::string_view l = lines[i];
        if (i > 0) l.remove_prefix(std::min(common, l.size()));  // blank lines may be shorter
        out.append(l);
    }
    if (text.ends_with('\n')) out += '\n';
    return out;
}

std::string basename_of(std::string_view path) {
    auto slash = path.find_last_of('/');
    return std::string(slash == std::string_view::npos ? path : path.substr(slash + 1));
}

std::string rel_path(const fs::path& path, const fs::path& root) {
    return path.lexically_relative(root).generic_string();
}

bool path_has_suffix(std::string_view path, std::string_view suffix) {
    if (suffix.empty()) return false;
    if (path == suffix) return true;
    return path.size() > suffix.size() && path.ends_with(suffix) && path[path.size() - suffix.size() - 1] == '/';
}

DirLock::DirLock(const fs::path& dir) {
    fs::create_directories(dir);
    fs::path lock = dir / ".lock";
    fd_ = ::open(lock.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open lock file " + lock.string());
    if (::flock(fd_, LOCK_EX) != 0) {
        ::close(fd_);
        throw Error("cannot lock " + lock.string());
    }
}

DirLock::~DirLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

namespace {

bool skipped_dir(const std::string& name) {
    return name == ".git" || name == ".ebtforge" || name == "target" || name == "build";
}

}  // namespace

void copy_tree(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    for (auto it = fs::recursive_directory_iterator(from); it != fs::recursive_directory_iterator(); ++it) {
        const auto& entry = *it;
        std::string name = entry.path().filename().string();
        if (entry.is_directory() && it.depth() == 0 && skipped_dir(name)) {
            it.disable_recursion_pending();
            continue;
        }
        fs::path dest = to / entry.path().lexically_relative(from);
        if (entry.is_directory()) {
            fs::create_directories(dest);
        } else if (entry.is_regular_file()) {
            fs::copy_file(entry.path(), dest, fs::copy_options::overwrite_existing);
        }
    }
}

fs::path make_temp_dir(std::string_view prefix) {
    std::random_device rd;
    for (int attempt = 0; attempt < 100; ++attempt) {
        fs::path p = fs::temp_directory_path() / fmt::format("{}-{:08x}", prefix, rd());
        if (fs::create_directory(p)) return p;
    }
    throw Error("cannot create temporary directory");
}

std::string tree_hash(const fs::path& root, const std::vector<std::string>& skip) {
    std::vector<std::string> files;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        std::string rel = rel_path(it->path(), root);
        bool skip_it = rel == ".git" || std::find(skip.begin(), skip.end(), rel) != skip.end();
        if (skip_it) {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        if (it->is_regular_file()) files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) {
        acc += f;
        acc += '\0';
        acc += hex16(fnv1a64(read_file(root / f)));
        acc += '\n';
    }
    return hex16(fnv1a64(acc));
}

}  // namespace ebtforge::detail
