#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pwmd {

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path; `parallel` must produce bit-identical output for any thread count.
enum class Exec { serial, parallel };

int max_threads() noexcept;
void set_threads(int count) noexcept;

/// Replications are reduced in fixed chunks of this size and the chunk
/// partials combined in chunk order, which pins the floating-point summation
/// order independently of scheduling.
inline constexpr std::size_t kReplicationChunk = 4096;

/// Calls body(i) for i in [0, n). Iterations must be independent.
template <class Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) body(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) body(i);
  }
}

/// Deterministic reduction over replications. `Acc` needs a default
/// constructor and `merge(const Acc&)`; `body(r, acc)` folds replication r.
template <class Acc, class Body>
Acc reduce_replications(std::size_t reps, Exec exec, Body&& body) {
  const std::size_t chunks = (reps + kReplicationChunk - 1) / kReplicationChunk;
  std::vector<Acc> partial(chunks);
  for_each_index(chunks, exec, [&](std::size_t c) {
    const std::size_t begin = c * kReplicationChunk;
    const std::size_t end = begin + kReplicationChunk < reps ? begin + kReplicationChunk : reps;
    Acc acc;
    for (std::size_t r = begin; r < end; ++r) body(r, acc);
    partial[c] = acc;
  });
  Acc total;
  for (const Acc& a : partial) total.merge(a);
  return total;
}

}  // namespace pwmd
