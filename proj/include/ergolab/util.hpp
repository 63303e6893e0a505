#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

namespace ergolab {

// Neumaier compensated accumulator. Reductions over ensembles use this so the
// result does not depend on chunking.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

Eigen::ArrayXd linspace(double lo, double hi, int n);

// Uniform grid {step, 2*step, ..., n*step}.
Eigen::ArrayXd uniform_grid(double step, int n);

// Shortest round-trip decimal representation (std::to_chars).
std::string format_double(double x);

// Thread count: explicit argument wins, then ERGOLAB_THREADS, then hardware.
int default_thread_count();

// Runs fn(i) for i in [0, n) on up to n_threads workers. Each index is an
// independent work unit; fn must only write to slots owned by its index.
void parallel_for(std::int64_t n, int n_threads, const std::function<void(std::int64_t)>& fn);

inline double sqr(double x) { return x * x; }

}  // namespace ergolab
