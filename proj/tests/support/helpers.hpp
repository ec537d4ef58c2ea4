#pragma once

#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>

#include "negmtl/autodiff.hpp"

namespace negmtl::testing {

inline Tensor mat(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad = false) {
  std::vector<double> values;
  std::size_t cols = 0;
  for (const auto& r : rows) {
    cols = r.size();
    values.insert(values.end(), r.begin(), r.end());
  }
  return Tensor::matrix(rows.size(), cols, std::move(values), requires_grad);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("negmtl-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace negmtl::testing
