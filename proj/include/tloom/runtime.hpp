#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace tloom::runtime {

/// Execution settings for data-parallel loops.
///
/// `workers` is the number of chunks a loop is split into (1 = strictly
/// sequential, no pool involvement).  Loops shorter than `parallel_threshold`
/// stay sequential regardless of `workers`.
struct ExecConfig {
  int workers = 1;
  std::int64_t parallel_threshold = 4096;
};

/// Process-wide default used by tensor comprehensions.  Initialised once from
/// the TENSORLOOM_MT environment variable (worker count) if it is set.
ExecConfig global_config();
void set_global_config(const ExecConfig& cfg);

/// Half-open range [lo, hi) owned by worker `w` out of `workers` for a loop of
/// length `n`: block scheduling with block size ceil(n / workers).  Trailing
/// workers may own an empty range.
std::pair<std::int64_t, std::int64_t> static_chunk(std::int64_t n, int workers, int w);

/// True while the calling thread is executing inside a parallel region.
/// Nested loops observe this and run sequentially.
bool inside_parallel_region();

/// Runs `body(lo, hi)` over a static partition of [0, n).  Sequential when
/// workers <= 1, n < threshold, or already inside a parallel region.  The
/// caller's thread executes chunk 0; pool threads execute the rest.  If
/// several chunks throw, the exception from the lowest-numbered chunk (and
/// therefore the lowest failing index, since chunk bodies fail at their first
/// bad index) is rethrown after all chunks finish.
void run_static(std::int64_t n, const ExecConfig& cfg,
                const std::function<void(std::int64_t, std::int64_t)>& body);

/// Fills a buffer of `frame_count * cell_size` floats where element `i` of the
/// frame owns the slice [i * cell_size, (i + 1) * cell_size).  `elem` must
/// write the whole slice it is handed.  Scheduling follows run_static.
std::vector<float> parallel_build(std::int64_t frame_count, std::int64_t cell_size,
                                  const ExecConfig& cfg,
                                  const std::function<void(std::int64_t, float*)>& elem);

}  // namespace tloom::runtime
