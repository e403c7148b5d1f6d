#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace codemt {

// Shared worker pool for data-parallel loops. Work is always split into a
// fixed number of index chunks that depends only on the problem size, and
// each chunk writes disjoint outputs, so results are bit-identical no matter
// how many worker threads execute them.
class ThreadPool {
  public:
    static ThreadPool& global() {
        static ThreadPool pool;
        return pool;
    }

    void set_workers(int n) {
        stop_workers();
        start_workers(n);
    }

    int workers() const { return static_cast<int>(threads_.size()) + 1; }

    // Runs fn(task) for task in [0, n_tasks). Blocks until all tasks finish.
    // Concurrent callers serialize; a pool worker that re-enters (nested
    // parallelism) executes its tasks inline.
    void run(int n_tasks, const std::function<void(int)>& fn) {
        if (n_tasks <= 0) return;
        if (n_tasks == 1 || threads_.empty() || inside_worker() || !run_mu_.try_lock()) {
            for (int t = 0; t < n_tasks; ++t) fn(t);
            return;
        }
        std::lock_guard<std::mutex> run_guard(run_mu_, std::adopt_lock);
        {
            std::unique_lock<std::mutex> lock(mu_);
            job_ = &fn;
            next_task_.store(0, std::memory_order_relaxed);
            tasks_total_ = n_tasks;
            tasks_done_.store(0, std::memory_order_relaxed);
            ++generation_;
        }
        cv_.notify_all();
        work_loop(fn, n_tasks);
        std::unique_lock<std::mutex> lock(mu_);
        done_cv_.wait(lock, [&] { return tasks_done_.load() >= tasks_total_; });
        job_ = nullptr;
    }

    ~ThreadPool() { stop_workers(); }

  private:
    ThreadPool() {
        unsigned hw = std::thread::hardware_concurrency();
        int n = hw ? static_cast<int>(hw) : 1;
        if (n > 8) n = 8;
        start_workers(n);
    }

    void start_workers(int n) {
        stopping_ = false;
        for (int i = 1; i < n; ++i) {
            threads_.emplace_back([this] { worker_main(); });
        }
    }

    void stop_workers() {
        {
            std::unique_lock<std::mutex> lock(mu_);
            stopping_ = true;
            ++generation_;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
        threads_.clear();
    }

    static bool& inside_worker() {
        thread_local bool flag = false;
        return flag;
    }

    void worker_main() {
        inside_worker() = true;
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* job = nullptr;
            int total = 0;
            {
                std::unique_lock<std::mutex> lock(mu_);
                cv_.wait(lock, [&] { return stopping_ || generation_ != seen; });
                seen = generation_;
                if (stopping_) return;
                job = job_;
                total = tasks_total_;
            }
            if (job) work_loop(*job, total);
        }
    }

    void work_loop(const std::function<void(int)>& fn, int total) {
        for (;;) {
            int t = next_task_.fetch_add(1, std::memory_order_relaxed);
            if (t >= total) break;
            fn(t);
            if (tasks_done_.fetch_add(1) + 1 >= total) {
                std::unique_lock<std::mutex> lock(mu_);
                done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> threads_;
    std::mutex run_mu_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    const std::function<void(int)>* job_ = nullptr;
    std::atomic<int> next_task_{0};
    std::atomic<int> tasks_done_{0};
    int tasks_total_ = 0;
    std::uint64_t generation_ = 0;
    bool stopping_ = false;
};

// Fixed chunking: the chunk count is a function of `n` only, never of the
// worker count, so per-chunk accumulation order is stable.
inline void parallel_chunks(std::int64_t n, std::int64_t min_chunk,
                            const std::function<void(std::int64_t, std::int64_t)>& body) {
    if (n <= 0) return;
    std::int64_t chunks = n / (min_chunk > 0 ? min_chunk : 1);
    if (chunks > 8) chunks = 8;
    if (chunks < 1) chunks = 1;
    std::int64_t per = (n + chunks - 1) / chunks;
    ThreadPool::global().run(static_cast<int>(chunks), [&](int c) {
        std::int64_t lo = c * per;
        std::int64_t hi = lo + per < n ? lo + per : n;
        if (lo < hi) body(lo, hi);
    });
}

}  // namespace codemt
