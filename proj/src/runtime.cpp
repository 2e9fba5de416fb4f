#include "tloom/runtime.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "tloom/errors.hpp"

namespace tloom::runtime {

namespace {

thread_local bool tl_in_parallel = false;

struct ParallelGuard {
  bool prev;
  ParallelGuard() : prev(tl_in_parallel) { tl_in_parallel = true; }
  ~ParallelGuard() { tl_in_parallel = prev; }
};

// Lazily grown pool of worker threads, created once per process and reused by
// every parallel loop.  Workers are identified by a fixed id; a dispatch hands
// task ids 1..task_count-1 to workers 0..task_count-2 while the caller runs
// task 0 itself.  Tasks must not throw (run_static wraps bodies).
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void run(int task_count, const std::function<void(int)>& task) {
    std::lock_guard<std::mutex> dispatch_lock(dispatch_mutex_);
    ensure_threads(task_count - 1);
    {
      std::lock_guard<std::mutex> lk(mutex_);
      task_ = &task;
      task_count_ = task_count;
      pending_ = task_count - 1;
      ++generation_;
    }
    work_cv_.notify_all();
    {
      ParallelGuard guard;
      task(0);
    }
    std::unique_lock<std::mutex> lk(mutex_);
    done_cv_.wait(lk, [&] { return pending_ == 0; });
    task_ = nullptr;
  }

 private:
  Pool() = default;

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      shutdown_ = true;
    }
    work_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  void ensure_threads(int count) {
    std::lock_guard<std::mutex> lk(mutex_);
    while (static_cast<int>(threads_.size()) < count) {
      int id = static_cast<int>(threads_.size());
      threads_.emplace_back([this, id] { worker_loop(id); });
    }
  }

  void worker_loop(int id) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int)>* task = nullptr;
      {
        std::unique_lock<std::mutex> lk(mutex_);
        work_cv_.wait(lk, [&] { return shutdown_ || generation_ != seen; });
        if (shutdown_) return;
        seen = generation_;
        if (id + 1 >= task_count_) continue;  // not needed this round
        task = task_;
      }
      {
        ParallelGuard guard;
        (*task)(id + 1);
      }
      {
        std::lock_guard<std::mutex> lk(mutex_);
        --pending_;
      }
      done_cv_.notify_one();
    }
  }

  std::mutex dispatch_mutex_;
  std::mutex mutex_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> threads_;
  const std::function<void(int)>* task_ = nullptr;
  std::uint64_t generation_ = 0;
  int task_count_ = 0;
  int pending_ = 0;
  bool shutdown_ = false;
};

ExecConfig initial_config() {
  ExecConfig cfg;
  if (const char* env = std::getenv("TENSORLOOM_MT")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) cfg.workers = static_cast<int>(v);
  }
  return cfg;
}

std::mutex g_config_mutex;
ExecConfig g_config = initial_config();

}  // namespace

ExecConfig global_config() {
  std::lock_guard<std::mutex> lk(g_config_mutex);
  return g_config;
}

void set_global_config(const ExecConfig& cfg) {
  if (cfg.workers < 1) throw Error("ExecConfig: workers must be >= 1");
  if (cfg.parallel_threshold < 0) throw Error("ExecConfig: parallel_threshold must be >= 0");
  std::lock_guard<std::mutex> lk(g_config_mutex);
  g_config = cfg;
}

std::pair<std::int64_t, std::int64_t> static_chunk(std::int64_t n, int workers, int w) {
  if (n < 0 || workers < 1 || w < 0 || w >= workers)
    throw Error("static_chunk: invalid arguments");
  const std::int64_t block = (n + workers - 1) / workers;
  const std::int64_t lo = std::min<std::int64_t>(static_cast<std::int64_t>(w) * block, n);
  const std::int64_t hi = std::min<std::int64_t>(lo + block, n);
  return {lo, hi};
}

bool inside_parallel_region() { return tl_in_parallel; }

void run_static(std::int64_t n, const ExecConfig& cfg,
                const std::function<void(std::int64_t, std::int64_t)>& body) {
  if (cfg.workers < 1) throw Error("run_static: workers must be >= 1");
  if (n <= 0) return;
  if (cfg.workers == 1 || n < cfg.parallel_threshold || inside_parallel_region()) {
    body(0, n);
    return;
  }

  struct Failure {
    std::mutex mutex;
    std::int64_t chunk_lo = -1;
    std::exception_ptr error;
  } failure;

  Pool::instance().run(cfg.workers, [&](int w) {
    auto [lo, hi] = static_chunk(n, cfg.workers, w);
    if (lo >= hi) return;
    try {
      body(lo, hi);
    } catch (...) {
      std::lock_guard<std::mutex> lk(failure.mutex);
      if (failure.chunk_lo < 0 || lo < failure.chunk_lo) {
        failure.chunk_lo = lo;
        failure.error = std::current_exception();
      }
    }
  });

  if (failure.error) std::rethrow_exception(failure.error);
}

std::vector<float> parallel_build(std::int64_t frame_count, std::int64_t cell_size,
                                  const ExecConfig& cfg,
                                  const std::function<void(std::int64_t, float*)>& elem) {
  if (frame_count < 0 || cell_size < 0) throw Error("parallel_build: negative extent");
  std::vector<float> out(static_cast<std::size_t>(frame_count * cell_size));
  float* base = out.data();
  run_static(frame_count, cfg, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) elem(i, base + i * cell_size);
  });
  return out;
}

}  // namespace tloom::runtime
