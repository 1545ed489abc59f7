#include "polarseg/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace polarseg {

namespace {

int resolve_default_threads() {
    if (const char* env = std::getenv("POLARSEG_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return std::min(n, 64);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return std::clamp<int>(static_cast<int>(hw), 1, 16);
}

std::atomic<int> g_num_threads{0};

using BlockFn = std::function<void(int, std::int64_t, std::int64_t)>;

// Persistent pool: spawning threads per conv call would dominate small layers.
class Pool {
public:
    explicit Pool(int workers) : workers_(workers) {
        for (int i = 1; i < workers; ++i) {
            threads_.emplace_back([this, i] { worker_loop(i); });
        }
    }

    ~Pool() {
        {
            std::lock_guard<std::mutex> lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : threads_) t.join();
    }

    void run(std::int64_t n, const BlockFn& fn) {
        const int blocks = std::min<int>(workers_, num_threads());
        if (blocks <= 1 || n < 2 || running_.load(std::memory_order_relaxed)) {
            fn(0, 0, n);
            return;
        }
        running_.store(true, std::memory_order_relaxed);
        {
            std::lock_guard<std::mutex> lk(mu_);
            job_n_ = n;
            job_fn_ = &fn;
            job_blocks_ = blocks;
            pending_ = workers_ - 1;
            ++epoch_;
        }
        cv_.notify_all();
        run_block(0, n, blocks, fn);
        std::unique_lock<std::mutex> lk(mu_);
        done_cv_.wait(lk, [this] { return pending_ == 0; });
        job_fn_ = nullptr;
        running_.store(false, std::memory_order_relaxed);
    }

    int workers() const { return workers_; }

private:
    static void block_range(std::int64_t n, int nblocks, int b, std::int64_t* lo, std::int64_t* hi) {
        const std::int64_t chunk = n / nblocks;
        const std::int64_t rem = n % nblocks;
        *lo = b * chunk + std::min<std::int64_t>(b, rem);
        *hi = *lo + chunk + (b < rem ? 1 : 0);
    }

    static void run_block(int b, std::int64_t n, int nblocks, const BlockFn& fn) {
        std::int64_t lo, hi;
        block_range(n, nblocks, b, &lo, &hi);
        if (lo < hi) fn(b, lo, hi);
    }

    void worker_loop(int idx) {
        std::uint64_t seen = 0;
        for (;;) {
            const BlockFn* fn = nullptr;
            std::int64_t n = 0;
            int blocks = 1;
            {
                std::unique_lock<std::mutex> lk(mu_);
                cv_.wait(lk, [&] { return stop_ || epoch_ != seen; });
                if (stop_) return;
                seen = epoch_;
                fn = job_fn_;
                n = job_n_;
                blocks = job_blocks_;
            }
            if (fn && idx < blocks) run_block(idx, n, blocks, *fn);
            {
                std::lock_guard<std::mutex> lk(mu_);
                if (--pending_ == 0) done_cv_.notify_one();
            }
        }
    }

    std::vector<std::thread> threads_;
    int workers_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable done_cv_;
    bool stop_ = false;
    std::uint64_t epoch_ = 0;
    int pending_ = 0;
    std::int64_t job_n_ = 0;
    int job_blocks_ = 1;
    std::atomic<bool> running_{false};
    const BlockFn* job_fn_ = nullptr;
};

Pool& pool() {
    static Pool p(num_threads());
    return p;
}

}  // namespace

int num_threads() {
    int n = g_num_threads.load(std::memory_order_relaxed);
    if (n == 0) {
        n = resolve_default_threads();
        g_num_threads.store(n, std::memory_order_relaxed);
    }
    return n;
}

void set_num_threads(int n) {
    g_num_threads.store(std::clamp(n, 1, 64), std::memory_order_relaxed);
}

int parallel_block_count() {
    return std::min(pool().workers(), num_threads());
}

void parallel_for_blocks(std::int64_t n, const BlockFn& fn) {
    if (n <= 0) return;
    pool().run(n, fn);
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    pool().run(n, [&fn](int, std::int64_t lo, std::int64_t hi) { fn(lo, hi); });
}

}  // namespace polarseg
