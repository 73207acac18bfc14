// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 the scatterformer authors
#include "sf/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace sf {

namespace {

class Pool {
 public:
  static Pool& instance() {
    static Pool p;
    return p;
  }

  void resize(int n) {
    if (n < 1) throw std::invalid_argument("thread count must be >= 1");
    std::lock_guard<std::mutex> outer(resize_mutex_);
    stop_workers();
    want_ = n;
    start_workers();
  }

  int size() {
    std::lock_guard<std::mutex> outer(resize_mutex_);
    return want_;
  }

  void run(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    // Nested or single-threaded: run inline.
    if (in_parallel_region_ || want_ <= 1 || n == 1) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::lock_guard<std::mutex> outer(resize_mutex_);
    {
      std::lock_guard<std::mutex> lk(m_);
      job_fn_ = &fn;
      job_n_ = n;
      next_ = 0;
      pending_ = n;
      ++generation_;
    }
    cv_.notify_all();
    // The caller participates too.
    in_parallel_region_ = true;
    work();
    in_parallel_region_ = false;
    std::unique_lock<std::mutex> lk(m_);
    done_cv_.wait(lk, [&] { return pending_ == 0; });
    job_fn_ = nullptr;
  }

 private:
  Pool() { start_workers(); }
  ~Pool() { stop_workers(); }

  void start_workers() {
    stopping_ = false;
    for (int i = 0; i < want_ - 1; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  void stop_workers() {
    {
      std::lock_guard<std::mutex> lk(m_);
      stopping_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
    workers_.clear();
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    in_parallel_region_ = true;
    for (;;) {
      {
        std::unique_lock<std::mutex> lk(m_);
        cv_.wait(lk, [&] { return stopping_ || generation_ != seen; });
        seen = generation_;
        if (stopping_) return;
        if (job_fn_ == nullptr) continue;
      }
      work();
    }
  }

  void work() {
    for (;;) {
      std::size_t i = next_.fetch_add(1);
      if (i >= job_n_) break;
      (*job_fn_)(i);
      if (pending_.fetch_sub(1) == 1) {
        std::lock_guard<std::mutex> lk(m_);
        done_cv_.notify_all();
      }
    }
  }

  std::mutex resize_mutex_;
  std::mutex m_;
  std::condition_variable cv_, done_cv_;
  std::vector<std::thread> workers_;
  int want_ = 1;
  bool stopping_ = false;
  std::uint64_t generation_ = 0;
  const std::function<void(std::size_t)>* job_fn_ = nullptr;
  std::size_t job_n_ = 0;
  std::atomic<std::size_t> next_{0};
  std::atomic<std::size_t> pending_{0};
  static thread_local bool in_parallel_region_;
};

thread_local bool Pool::in_parallel_region_ = false;

}  // namespace

void set_num_threads(int n) { Pool::instance().resize(n); }
int num_threads() { return Pool::instance().size(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  Pool::instance().run(n, fn);
}

}  // namespace sf
