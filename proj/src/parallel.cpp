#include "gevlab/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace gev {

Mapper thread_mapper(int workers) {
  if (workers <= 1) return serial_map;
  return [workers](size_t count, const std::function<void(size_t)>& body) {
    std::atomic<size_t> next{0};
    std::exception_ptr first;
    std::mutex mu;
    auto run = [&] {
      for (size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
          next = count;
        }
      }
    };
    std::vector<std::thread> pool;
    const size_t n = std::min<size_t>(workers, count);
    for (size_t t = 0; t < n; ++t) pool.emplace_back(run);
    for (auto& t : pool) t.join();
    if (first) std::rethrow_exception(first);
  };
}

}  // namespace gev
