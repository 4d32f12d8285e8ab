// Frame-synchronous worker pool: fixed contiguous bin ranges processed in
// lockstep, one task invocation per frame per range. The caller's thread
// takes the last range itself, so `threads = n` uses n-1 auxiliary workers.

#pragma once

#include <barrier>
#include <functional>
#include <thread>
#include <utility>
#include <vector>

namespace af {

class BinWorkerPool {
 public:
  using RangeTask = std::function<void(int k0, int k1)>;

  BinWorkerPool(int threads, int bins)
      : barrier_(std::max(1, threads)), done_(std::max(1, threads)) {
    threads = std::max(1, threads);
    int per = (bins + threads - 1) / threads;
    for (int i = 0; i < threads; ++i) {
      int k0 = std::min(bins, i * per);
      int k1 = std::min(bins, (i + 1) * per);
      ranges_.emplace_back(k0, k1);
    }
    for (int i = 0; i + 1 < threads; ++i) {
      workers_.emplace_back([this, i] {
        for (;;) {
          barrier_.arrive_and_wait();
          if (stop_) return;
          task_(ranges_[static_cast<std::size_t>(i)].first,
                ranges_[static_cast<std::size_t>(i)].second);
          done_.arrive_and_wait();
        }
      });
    }
  }

  ~BinWorkerPool() {
    if (!workers_.empty()) {
      stop_ = true;
      barrier_.arrive_and_wait();
      for (std::thread& w : workers_) w.join();
    }
  }

  BinWorkerPool(const BinWorkerPool&) = delete;
  BinWorkerPool& operator=(const BinWorkerPool&) = delete;

  // Runs the task over every range; returns when the whole frame is done.
  void run(const RangeTask& task) {
    if (workers_.empty()) {
      task(ranges_.back().first, ranges_.back().second);
      return;
    }
    task_ = task;
    barrier_.arrive_and_wait();
    task(ranges_.back().first, ranges_.back().second);
    done_.arrive_and_wait();
  }

  int thread_count() const { return static_cast<int>(workers_.size()) + 1; }

 private:
  std::vector<std::pair<int, int>> ranges_;
  std::vector<std::thread> workers_;
  RangeTask task_;
  std::barrier<> barrier_;
  std::barrier<> done_;
  bool stop_ = false;
};

}  // namespace af
