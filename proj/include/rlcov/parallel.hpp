#pragma once

#include <exception>
#include <functional>
#include <mutex>
#include <vector>

#include "rlcov/topology.hpp"

namespace rlcov {

/// How a tree walk or kernel assembly is scheduled.
///
/// Serial is the reference: a plain recursive traversal in the order the
/// algorithms are written. Parallel visits one tree level at a time and
/// spreads the nodes of a level across OpenMP threads. Every per-node
/// computation only reads finished results of its children (upward) or its
/// parent (downward), so both schedules produce bitwise-identical output.
enum class Exec { Serial, Parallel };

/// Caps the OpenMP thread count used by Exec::Parallel.
void set_num_threads(int threads);
int max_threads();

namespace detail {

// Rethrows the exception raised at the smallest node id, so that failures are
// reported identically under both schedules.
class FirstError {
 public:
  void capture(int node) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (!error_ || node < node_) {
      error_ = std::current_exception();
      node_ = node;
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mutex_;
  std::exception_ptr error_;
  int node_ = 0;
};

void run_level(const std::vector<int>& level, const std::function<void(int)>& visit, FirstError& errors);

}  // namespace detail

/// Calls `visit(i)` for every node after all of its children were visited.
template <class Visit>
void walk_up(const Topology& topo, Exec exec, Visit&& visit) {
  if (exec == Exec::Serial) {
    std::function<void(int)> rec = [&](int i) {
      for (int j : topo.children(i)) rec(j);
      visit(i);
    };
    rec(0);
    return;
  }
  detail::FirstError errors;
  const auto& levels = topo.levels();
  for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
    detail::run_level(*it, visit, errors);
    errors.rethrow();
  }
}

/// Calls `visit(i)` for every node before any of its children are visited.
template <class Visit>
void walk_down(const Topology& topo, Exec exec, Visit&& visit) {
  if (exec == Exec::Serial) {
    std::function<void(int)> rec = [&](int i) {
      visit(i);
      for (int j : topo.children(i)) rec(j);
    };
    rec(0);
    return;
  }
  detail::FirstError errors;
  for (const auto& level : topo.levels()) {
    detail::run_level(level, visit, errors);
    errors.rethrow();
  }
}

/// Runs `body(k)` for k in [0, count). The parallel version uses a static
/// schedule; `body` must write only to slots owned by k.
void parallel_for(int count, Exec exec, const std::function<void(int)>& body);

}  // namespace rlcov
