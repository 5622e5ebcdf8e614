#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ebtforge::detail {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

/// Writes via a sibling temp file and rename, creating parent directories.
void write_file_atomic(const fs::path& path, std::string_view content);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex16(std::uint64_t v);

std::string_view trim(std::string_view s);
std::vector<std::string> split_lines(std::string_view text);
std::string basename_of(std::string_view path);

/// For text sliced from mid-line (first line unindented): strips the
/// indentation common to the non-blank lines after the first.
std::string dedent_tail(std::string_view text);

/// `path` relative to `root` with forward slashes.
std::string rel_path(const fs::path& path, const fs::path& root);

/// True if `path` equals `suffix` or ends with "/" + suffix.
bool path_has_suffix(std::string_view path, std::string_view suffix);

/// Exclusive advisory lock on <dir>/.lock, held for the object's lifetime.
class DirLock {
public:
    explicit DirLock(const fs::path& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    int fd_ = -1;
};

/// Copies `from` into `to`, skipping VCS metadata, the tool's own cache
/// directory and build outputs.
void copy_tree(const fs::path& from, const fs::path& to);

/// Fresh directory under the system temp dir.
fs::path make_temp_dir(std::string_view prefix);

/// Content hash of every regular file under `root` (paths included),
/// skipping .git and the given top-level relative paths.
std::string tree_hash(const fs::path& root, const std::vector<std::string>& skip = {});

}  // namespace ebtforge::detail
