#include "report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "sus/error.hpp"

namespace sus::cli {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += fields[i];
  }
  line += '\n';
  return line;
}

OutputTarget::OutputTarget(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  tmp_ = path_.string() + ".tmp";
  std::ofstream probe(tmp_, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(probe), ErrorKind::kInput, "cannot write to " + path_.string());
}

OutputTarget::~OutputTarget() {
  if (!path_.empty() && !committed_) {
    std::error_code ec;
    std::filesystem::remove(tmp_, ec);
  }
}

void OutputTarget::commit(const std::string& content) {
  if (path_.empty()) {
    std::cout << content << std::flush;
    return;
  }
  {
    std::ofstream out(tmp_, std::ios::binary | std::ios::trunc);
    out << content;
    require(static_cast<bool>(out), ErrorKind::kInput, "write failed for " + path_.string());
  }
  std::filesystem::rename(tmp_, path_);
  committed_ = true;
}

}  // namespace sus::cli
