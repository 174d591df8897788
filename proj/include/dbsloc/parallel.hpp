#pragma once

#include <cstddef>
#include <vector>

namespace dbs::parallel {

/// Caps OpenMP worker count; n <= 0 restores the runtime default.
void set_thread_count(int n);
int thread_count();

/// Fixed block size for reductions. Partial results are produced per block
/// and folded in block order, so sums do not depend on the thread count.
inline constexpr std::size_t kReductionBlock = 4096;

inline std::size_t block_count(std::size_t n) { return (n + kReductionBlock - 1) / kReductionBlock; }

/// Runs `block_fn(begin, end, partial)` for each block of [0, n) in parallel,
/// then folds the partials left to right with `fold(acc, partial)`.
template <typename Partial, typename BlockFn, typename Fold>
Partial blocked_reduce(std::size_t n, Partial init, BlockFn&& block_fn, Fold&& fold) {
  const std::size_t nb = block_count(n);
  std::vector<Partial> partials(nb, init);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(nb); ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kReductionBlock;
    const std::size_t end = begin + kReductionBlock < n ? begin + kReductionBlock : n;
    block_fn(begin, end, partials[static_cast<std::size_t>(b)]);
  }
  Partial acc = init;
  for (const auto& p : partials) fold(acc, p);
  return acc;
}

}  // namespace dbs::parallel
