#include "ratchet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ratchet {

int default_workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t, int)>& fn) {
  const auto count = static_cast<std::size_t>(std::max(1, workers));
  if (count == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> threads;
  const std::size_t used = std::min(count, n);
  threads.reserve(used);
  for (std::size_t w = 0; w < used; ++w) {
    threads.emplace_back([&, w] {
      for (std::size_t i = next++; i < n; i = next++) {
        {
          std::lock_guard lock(error_mutex);
          if (error) return;
        }
        try {
          fn(i, static_cast<int>(w));
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  threads.clear();  // joins
  if (error) std::rethrow_exception(error);
}

}  // namespace ratchet
