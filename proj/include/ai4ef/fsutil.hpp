#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ai4ef::fsutil {

namespace fs = std::filesystem;

/// Throws IoError when the file cannot be opened.
std::string read_file(const fs::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// see either the old or the new content.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// UTC ISO-8601 timestamp with millisecond precision.
std::string iso8601_now();

/// Exclusive lock on a directory, held through a `.lock` file created with
/// O_EXCL semantics. Throws Busy when another holder exists.
class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& directory);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path lock_path_;
};

}  // namespace ai4ef::fsutil
