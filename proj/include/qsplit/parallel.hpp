#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace qsplit {

/// Parallel-map capability handed to the numerical modules. Work is split
/// into contiguous index blocks; each index is processed by exactly one
/// worker with a fixed inner order, so results do not depend on the worker
/// count.
struct Executor {
  unsigned workers = 1;

  template <class Fn>
  void for_blocks(std::size_t n, Fn&& fn) const {
    const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
    if (w <= 1) {
      if (n > 0) fn(std::size_t{0}, n);
      return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(w);
    pool.reserve(w);
    for (std::size_t t = 0; t < w; ++t) {
      const std::size_t begin = n * t / w;
      const std::size_t end = n * (t + 1) / w;
      pool.emplace_back([&, t, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  template <class Fn>
  void for_each(std::size_t n, Fn&& fn) const {
    for_blocks(n, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
};

}  // namespace qsplit
