#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

namespace stabletrace {

inline constexpr int kMaxDim = 8;

/// Thrown when an adaptive numerical procedure cannot reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double achieved)
      : std::runtime_error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved_tolerance() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Thrown when a rejection sampler exceeds its iteration cap.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed-capacity point/vector in R^d, d <= kMaxDim. Value type, no allocation.
class Vec {
 public:
  Vec() = default;
  explicit Vec(int dim, double fill = 0.0) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim) throw std::domain_error("Vec: dimension out of range");
    std::fill_n(v_.begin(), dim, fill);
  }
  Vec(std::initializer_list<double> xs) : dim_(static_cast<int>(xs.size())) {
    if (dim_ < 1 || dim_ > kMaxDim) throw std::domain_error("Vec: dimension out of range");
    std::copy(xs.begin(), xs.end(), v_.begin());
  }
  static Vec axis(int dim, int k, double value = 1.0) {
    Vec e(dim);
    e[k] = value;
    return e;
  }

  int dim() const noexcept { return dim_; }
  double& operator[](int i) noexcept { return v_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const noexcept { return v_[static_cast<std::size_t>(i)]; }
  std::span<const double> values() const noexcept { return {v_.data(), static_cast<std::size_t>(dim_)}; }

  double norm2() const noexcept {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) s += v_[i] * v_[i];
    return s;
  }
  double norm() const noexcept { return std::sqrt(norm2()); }

  Vec& operator+=(const Vec& o) noexcept {
    for (int i = 0; i < dim_; ++i) v_[i] += o.v_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) noexcept {
    for (int i = 0; i < dim_; ++i) v_[i] -= o.v_[i];
    return *this;
  }
  Vec& operator*=(double s) noexcept {
    for (int i = 0; i < dim_; ++i) v_[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) noexcept { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) noexcept { return a -= b; }
  friend Vec operator*(Vec a, double s) noexcept { return a *= s; }
  friend Vec operator*(double s, Vec a) noexcept { return a *= s; }
  friend bool operator==(const Vec& a, const Vec& b) noexcept {
    if (a.dim_ != b.dim_) return false;
    for (int i = 0; i < a.dim_; ++i)
      if (a.v_[i] != b.v_[i]) return false;
    return true;
  }

 private:
  std::array<double, kMaxDim> v_{};
  int dim_ = 0;
};

inline double dot(const Vec& a, const Vec& b) noexcept {
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a[i] * b[i];
  return s;
}

inline double distance(const Vec& a, const Vec& b) noexcept { return (a - b).norm(); }

/// Dimension d and stability index alpha of a symmetric alpha-stable process
/// with characteristic function exp(-t |xi|^alpha).
struct StableParams {
  int d = 1;
  double alpha = 2.0;

  StableParams() = default;
  StableParams(int dim, double a) : d(dim), alpha(a) { validate(); }

  void validate() const {
    if (d < 1 || d > kMaxDim) throw std::domain_error("StableParams: dimension must be in [1, 8]");
    if (!(alpha > 0.0 && alpha <= 2.0)) throw std::domain_error("StableParams: alpha must be in (0, 2]");
  }
  bool is_gaussian() const noexcept { return alpha == 2.0; }
  /// Operations built on the Levy measure are only defined for alpha < 2.
  void require_jumps(const char* op) const {
    if (is_gaussian()) throw std::domain_error(std::string(op) + ": requires alpha < 2");
  }
  friend bool operator==(const StableParams&, const StableParams&) = default;
};

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Fixed-order pairwise summation; the result depends only on the input order.
inline double pairwise_sum(std::span<const double> xs) noexcept {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

}  // namespace stabletrace
