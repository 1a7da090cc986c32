#pragma once

#include <cstddef>
#include <functional>
#include <memory>

namespace freemesh {

// Worker count requested by the FMT_THREADS environment variable, or the
// hardware concurrency when it is unset or invalid.
std::size_t threads_from_environment();

// Caps library parallelism while alive. Results never depend on the cap.
class ThreadLimit {
 public:
  explicit ThreadLimit(std::size_t max_threads);
  ~ThreadLimit();
  ThreadLimit(const ThreadLimit&) = delete;
  ThreadLimit& operator=(const ThreadLimit&) = delete;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Calls body(lo, hi) over disjoint chunks covering [begin, end). Chunks run
// concurrently, so body must only write state owned by its own range.
void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace freemesh
