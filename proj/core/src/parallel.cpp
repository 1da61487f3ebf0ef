#include "dspec/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace dspec {
namespace {

int g_threads = []() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}();

thread_local bool t_inside_parallel = false;

// Minimal persistent pool. Slice ranges are a pure function of (n, slices),
// so the partitioning never depends on scheduling. run() is serialized;
// nested calls fall back to inline execution before reaching the pool.
class Pool {
public:
    static Pool& instance() {
        // leaked on purpose: detached workers may still be parked on the
        // condition variable when the process exits
        static Pool* pool = new Pool();
        return *pool;
    }

    void run(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn, int threads) {
        std::lock_guard<std::mutex> run_lock(run_mu_);
        ensure_workers(threads - 1);
        {
            std::lock_guard<std::mutex> lock(mu_);
            fn_ = &fn;
            total_ = n;
            slices_ = threads;
            pending_ = threads;
            error_ = nullptr;
            next_.store(0, std::memory_order_release);
            ++generation_;
        }
        cv_.notify_all();
        work();
        std::exception_ptr error;
        {
            std::unique_lock<std::mutex> lock(mu_);
            done_cv_.wait(lock, [&] { return pending_ == 0; });
            fn_ = nullptr;
            error = error_;
            error_ = nullptr;
        }
        if (error) std::rethrow_exception(error);
    }

private:
    Pool() = default;

    void ensure_workers(int wanted) {
        std::lock_guard<std::mutex> lock(mu_);
        while (static_cast<int>(workers_.size()) < wanted) {
            workers_.emplace_back([this, seen = generation_]() mutable {
                t_inside_parallel = true;
                for (;;) {
                    {
                        std::unique_lock<std::mutex> lk(mu_);
                        cv_.wait(lk, [&] { return generation_ != seen; });
                        seen = generation_;
                    }
                    work();
                }
            });
            workers_.back().detach();
        }
    }

    void work() {
        for (;;) {
            const int slice = next_.fetch_add(1, std::memory_order_acq_rel);
            if (slice >= slices_) break;
            const std::int64_t per = (total_ + slices_ - 1) / slices_;
            const std::int64_t begin = static_cast<std::int64_t>(slice) * per;
            const std::int64_t end = std::min<std::int64_t>(total_, begin + per);
            std::exception_ptr error;
            if (begin < end) {
                try {
                    (*fn_)(begin, end);
                } catch (...) {
                    error = std::current_exception();
                }
            }
            std::lock_guard<std::mutex> lk(mu_);
            if (error && !error_) error_ = error;
            if (--pending_ == 0) done_cv_.notify_all();
        }
    }

    std::mutex run_mu_;
    std::mutex mu_;
    std::condition_variable cv_, done_cv_;
    std::vector<std::thread> workers_;
    const std::function<void(std::int64_t, std::int64_t)>* fn_ = nullptr;
    std::int64_t total_ = 0;
    int slices_ = 0;
    int pending_ = 0;
    std::uint64_t generation_ = 0;
    std::exception_ptr error_ = nullptr;
    std::atomic<int> next_{0};
};

} // namespace

int num_threads() { return g_threads; }

void set_num_threads(int n) { g_threads = n < 1 ? 1 : n; }

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    const int threads = static_cast<int>(std::min<std::int64_t>(g_threads, n));
    if (threads <= 1 || t_inside_parallel) {
        fn(0, n);
        return;
    }
    t_inside_parallel = true;
    try {
        Pool::instance().run(n, fn, threads);
    } catch (...) {
        t_inside_parallel = false;
        throw;
    }
    t_inside_parallel = false;
}

} // namespace dspec
