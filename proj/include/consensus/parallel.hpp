#ifndef CONSENSUS_PARALLEL_HPP
#define CONSENSUS_PARALLEL_HPP

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace consensus {

/// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs, so the
/// result does not depend on the thread count. `parallel = false` forces a
/// single thread in ascending index order.
template <typename Fn>
void parallel_for(std::ptrdiff_t n, bool parallel, Fn&& fn) {
#ifdef _OPENMP
  if (parallel && n > 256) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }
#else
  (void)parallel;
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

}  // namespace consensus

#endif  // CONSENSUS_PARALLEL_HPP
