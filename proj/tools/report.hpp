#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace sus::cli {

// Round-trip formatting for doubles, so output bytes depend only on values.
std::string num(double v);

std::string csv_line(const std::vector<std::string>& fields);

// An output target checked for writability up front. Content goes to
// `<path>.tmp` and is renamed over `path` on commit; an empty path means stdout.
class OutputTarget {
 public:
  explicit OutputTarget(std::filesystem::path path);
  ~OutputTarget();
  OutputTarget(const OutputTarget&) = delete;
  OutputTarget& operator=(const OutputTarget&) = delete;

  bool is_stdout() const noexcept { return path_.empty(); }
  const std::filesystem::path& path() const noexcept { return path_; }
  void commit(const std::string& content);

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  bool committed_ = false;
};

}  // namespace sus::cli
