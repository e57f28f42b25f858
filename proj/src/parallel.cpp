#include "rlcov/parallel.hpp"

#include <omp.h>

namespace rlcov {

void set_num_threads(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

namespace detail {

void run_level(const std::vector<int>& level, const std::function<void(int)>& visit, FirstError& errors) {
  const int count = static_cast<int>(level.size());
#pragma omp parallel for schedule(dynamic, 1) if (count > 1)
  for (int k = 0; k < count; ++k) {
    try {
      visit(level[k]);
    } catch (...) {
      errors.capture(level[k]);
    }
  }
}

}  // namespace detail

void parallel_for(int count, Exec exec, const std::function<void(int)>& body) {
  if (exec == Exec::Serial || count <= 1) {
    for (int k = 0; k < count; ++k) body(k);
    return;
  }
  detail::FirstError errors;
#pragma omp parallel for schedule(static)
  for (int k = 0; k < count; ++k) {
    try {
      body(k);
    } catch (...) {
      errors.capture(k);
    }
  }
  errors.rethrow();
}

}  // namespace rlcov
