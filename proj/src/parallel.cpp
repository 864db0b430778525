#include "coag/parallel.hpp"

#include <algorithm>

namespace coag {

ThreadPool::ThreadPool(int threads) {
  const int extra = std::max(0, threads - 1);
  workers_.reserve(extra);
  for (int i = 0; i < extra; ++i) workers_.emplace_back([this] { worker_loop(); });
}

ThreadPool::~ThreadPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& w : workers_) w.join();
}

bool ThreadPool::run_one() {
  std::ptrdiff_t chunk;
  const std::function<void(std::ptrdiff_t)>* body;
  {
    std::lock_guard lock(mutex_);
    if (body_ == nullptr || next_ >= total_) return false;
    chunk = next_++;
    body = body_;
  }
  (*body)(chunk);
  {
    std::lock_guard lock(mutex_);
    if (++finished_ == total_) done_.notify_all();
  }
  return true;
}

void ThreadPool::worker_loop() {
  std::size_t seen = 0;
  for (;;) {
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || (generation_ != seen && next_ < total_); });
      if (stop_) return;
      seen = generation_;
    }
    while (run_one()) {
    }
  }
}

void ThreadPool::parallel_for(std::ptrdiff_t chunks, const std::function<void(std::ptrdiff_t)>& body) {
  if (chunks <= 0) return;
  if (workers_.empty() || chunks == 1) {
    for (std::ptrdiff_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    next_ = 0;
    total_ = chunks;
    finished_ = 0;
    ++generation_;
  }
  wake_.notify_all();
  while (run_one()) {
  }
  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return finished_ == total_; });
  body_ = nullptr;
  total_ = 0;
  next_ = 0;
}

void for_range(ThreadPool* pool, std::ptrdiff_t n, std::ptrdiff_t grain,
               const std::function<void(std::ptrdiff_t, std::ptrdiff_t)>& body) {
  const ChunkPlan plan{n, std::max<std::ptrdiff_t>(1, grain)};
  if (pool == nullptr || pool->size() == 1) {
    if (n > 0) body(0, n);
    return;
  }
  pool->parallel_for(plan.chunks(), [&](std::ptrdiff_t c) { body(plan.begin(c), plan.end(c)); });
}

Eigen::VectorXd reduce_range(ThreadPool* pool, const ExecutionPolicy& policy, std::ptrdiff_t n,
                             std::ptrdiff_t grain, Eigen::Index width,
                             const std::function<void(std::ptrdiff_t, std::ptrdiff_t, Eigen::VectorXd&)>& body) {
  const ChunkPlan plan{n, std::max<std::ptrdiff_t>(1, grain)};
  const std::ptrdiff_t chunks = plan.chunks();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(width);
  if (policy.reproducible) {
    // Fixed chunk boundaries and a fixed combine order: identical bits for any thread count.
    std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(chunks), Eigen::VectorXd::Zero(width));
    auto run = [&](std::ptrdiff_t c) { body(plan.begin(c), plan.end(c), partial[static_cast<std::size_t>(c)]); };
    if (pool == nullptr || pool->size() == 1) {
      for (std::ptrdiff_t c = 0; c < chunks; ++c) run(c);
    } else {
      pool->parallel_for(chunks, run);
    }
    for (const auto& p : partial) total += p;
    return total;
  }
  if (pool == nullptr || pool->size() == 1) {
    if (n > 0) body(0, n, total);
    return total;
  }
  std::mutex m;
  pool->parallel_for(chunks, [&](std::ptrdiff_t c) {
    Eigen::VectorXd local = Eigen::VectorXd::Zero(width);
    body(plan.begin(c), plan.end(c), local);
    std::lock_guard lock(m);
    total += local;
  });
  return total;
}

}  // namespace coag
