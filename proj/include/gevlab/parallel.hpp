#pragma once

#include <cstddef>
#include <functional>

namespace gev {

// runs body(i) for i in [0, count); any order, any number of workers
using Mapper = std::function<void(size_t, const std::function<void(size_t)>&)>;

inline void serial_map(size_t count, const std::function<void(size_t)>& body) {
  for (size_t i = 0; i < count; ++i) body(i);
}

// std::thread workers with a shared atomic counter; workers <= 1 runs serially
Mapper thread_mapper(int workers);

}  // namespace gev
