#pragma once

#include <cmath>

namespace geoconsist::detail {

// Neumaier summation. Loss reductions use it so that perturbing one pixel
// changes the result by the perturbation, not by reordered rounding.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace geoconsist::detail
