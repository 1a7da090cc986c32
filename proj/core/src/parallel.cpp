#include "freemesh/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

#include <tbb/blocked_range.h>
#include <tbb/global_control.h>
#include <tbb/parallel_for.h>

namespace freemesh {

std::size_t threads_from_environment() {
  const std::size_t hardware = std::max(1u, std::thread::hardware_concurrency());
  const char* value = std::getenv("FMT_THREADS");
  if (value == nullptr || *value == '\0') return hardware;
  char* end = nullptr;
  const long parsed = std::strtol(value, &end, 10);
  if (end == value || *end != '\0' || parsed < 1) return hardware;
  return static_cast<std::size_t>(parsed);
}

struct ThreadLimit::Impl {
  explicit Impl(std::size_t n) : control(tbb::global_control::max_allowed_parallelism, n) {}
  tbb::global_control control;
};

ThreadLimit::ThreadLimit(std::size_t max_threads)
    : impl_(std::make_unique<Impl>(std::max<std::size_t>(1, max_threads))) {}

ThreadLimit::~ThreadLimit() = default;

void parallel_for(std::size_t begin, std::size_t end, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  if (begin >= end) return;
  if (end - begin <= grain) {
    body(begin, end);
    return;
  }
  tbb::parallel_for(tbb::blocked_range<std::size_t>(begin, end, std::max<std::size_t>(1, grain)),
                    [&](const tbb::blocked_range<std::size_t>& r) { body(r.begin(), r.end()); });
}

}  // namespace freemesh
