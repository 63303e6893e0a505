#include "ergolab/util.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <thread>
#include <vector>

namespace ergolab {

Eigen::ArrayXd linspace(double lo, double hi, int n) {
  return Eigen::ArrayXd::LinSpaced(n, lo, hi);
}

Eigen::ArrayXd uniform_grid(double step, int n) {
  Eigen::ArrayXd g(n);
  for (int i = 0; i < n; ++i) g[i] = step * (i + 1);
  return g;
}

std::string format_double(double x) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

int default_thread_count() {
  if (const char* env = std::getenv("ERGOLAB_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t n, int n_threads, const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  if (n_threads <= 0) n_threads = default_thread_count();
  n_threads = static_cast<int>(std::min<std::int64_t>(n_threads, n));
  if (n_threads == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::thread> workers;
  workers.reserve(n_threads);
  std::int64_t chunk = std::max<std::int64_t>(1, n / (8 * n_threads));
  for (int t = 0; t < n_threads; ++t) {
    workers.emplace_back([&]() {
      for (;;) {
        std::int64_t begin = next.fetch_add(chunk);
        if (begin >= n) return;
        std::int64_t end = std::min(begin + chunk, n);
        for (std::int64_t i = begin; i < end; ++i) fn(i);
      }
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace ergolab
