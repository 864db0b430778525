#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include <Eigen/Dense>

namespace coag {

/// How loops over the lattice are executed.
///
/// With `reproducible` set, reductions combine per-chunk partial results in a fixed
/// chunk order that does not depend on the thread count, so runs are bit-identical.
/// Otherwise partials are combined as workers finish.
struct ExecutionPolicy {
  int threads = 1;
  bool reproducible = false;
};

/// Fixed-size worker pool; parallel_for blocks until every chunk has run.
class ThreadPool {
 public:
  explicit ThreadPool(int threads);
  ~ThreadPool();
  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  /// Runs body(chunk) for chunk in [0, chunks). The calling thread participates.
  void parallel_for(std::ptrdiff_t chunks, const std::function<void(std::ptrdiff_t)>& body);

 private:
  void worker_loop();
  bool run_one();

  std::vector<std::thread> workers_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::ptrdiff_t)>* body_ = nullptr;
  std::ptrdiff_t next_ = 0;
  std::ptrdiff_t total_ = 0;
  std::ptrdiff_t finished_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
};

/// Splits [0, n) into contiguous blocks whose boundaries depend only on n and grain.
struct ChunkPlan {
  std::ptrdiff_t n = 0;
  std::ptrdiff_t grain = 1;
  std::ptrdiff_t chunks() const { return n == 0 ? 0 : (n + grain - 1) / grain; }
  std::ptrdiff_t begin(std::ptrdiff_t c) const { return c * grain; }
  std::ptrdiff_t end(std::ptrdiff_t c) const { return std::min(n, (c + 1) * grain); }
};

/// Runs body(begin, end) over [0, n) on the pool (or inline when pool is null).
void for_range(ThreadPool* pool, std::ptrdiff_t n, std::ptrdiff_t grain,
               const std::function<void(std::ptrdiff_t, std::ptrdiff_t)>& body);

/// Sums vector-valued partials body(begin, end, acc) over [0, n).
Eigen::VectorXd reduce_range(ThreadPool* pool, const ExecutionPolicy& policy, std::ptrdiff_t n,
                             std::ptrdiff_t grain, Eigen::Index width,
                             const std::function<void(std::ptrdiff_t, std::ptrdiff_t, Eigen::VectorXd&)>& body);

}  // namespace coag
