#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "occdist/rng.hpp"
#include "occdist/tensor.hpp"

namespace testsup {

// Central finite differences, 64-bit, step h. Independent of the tape:
// callers re-evaluate the forward expression from a flat parameter vector.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
    double h = 1e-5) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

// Relative error with an absolute floor so near-zero coordinates do not blow
// up the ratio.
inline double relative_error(double a, double b, double floor = 1e-2) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, relative_error(a[i], b[i]));
  }
  return worst;
}

template <typename T>
occdist::BasicTensor<T> random_tensor(std::vector<std::size_t> shape, occdist::Rng& rng,
                                      double scale = 1.0, bool requires_grad = false) {
  occdist::BasicTensor<T> t(std::move(shape), requires_grad);
  for (auto& v : t.data()) v = static_cast<T>(rng.normal() * scale);
  return t;
}

// Unique writable directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& prefix) {
    auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0;; ++attempt) {
      path_ = base / (prefix + "-" + std::to_string(::getpid()) + "-" + std::to_string(attempt));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testsup
