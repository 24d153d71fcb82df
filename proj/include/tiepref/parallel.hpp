#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <span>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tiepref {

// Every data-parallel kernel in the library exists in two flavors selected by
// this policy. Serial is the reference implementation used by the tests;
// Parallel runs the same chunk arithmetic under OpenMP.
enum class Exec { Serial, Parallel };

// Reductions use fixed-size chunks: terms accumulate sequentially inside each
// chunk and chunk partials combine serially in chunk order. The bracketing of
// every floating-point sum is therefore a function of n alone, so Serial and
// Parallel results are bit-identical for any worker count. Sized so that a
// typical minibatch already spans several chunks.
inline constexpr std::size_t kReductionChunk = 64;

namespace detail {

// Runs body(c) for c in [0, n_chunks), under OpenMP when requested.
// Exceptions thrown by the body are captured and rethrown after the loop;
// letting one escape an OpenMP region would terminate the process.
// Small chunk counts stay serial: forking costs more than two chunks of work.
// The chunk arithmetic is identical on both paths, so the choice never
// changes a single bit of the result.
template <typename Body>
void for_each_chunk(std::size_t n_chunks, Exec exec, Body&& body) {
  constexpr std::size_t kMinChunksToFork = 4;
  std::exception_ptr failure = nullptr;
#ifdef _OPENMP
  if (exec == Exec::Parallel && n_chunks >= kMinChunksToFork) {
#pragma omp parallel for schedule(static)
    for (long long c = 0; c < static_cast<long long>(n_chunks); ++c) {
      try {
        body(static_cast<std::size_t>(c));
      } catch (...) {
#pragma omp critical(tiepref_chunk_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    return;
  }
#else
  (void)exec;
#endif
  for (std::size_t c = 0; c < n_chunks; ++c) body(c);
  (void)failure;
}

}  // namespace detail

// Sum of term(i) for i in [0, n).
template <typename TermFn>
double indexed_sum(std::size_t n, Exec exec, TermFn&& term) {
  if (n == 0) return 0.0;
  const std::size_t n_chunks = (n + kReductionChunk - 1) / kReductionChunk;
  std::vector<double> partial(n_chunks, 0.0);
  detail::for_each_chunk(n_chunks, exec, [&](std::size_t c) {
    const std::size_t lo = c * kReductionChunk;
    const std::size_t hi = std::min(n, lo + kReductionChunk);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += term(i);
    partial[c] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

// Accumulates vector-valued terms: accum(i, chunk) must add term i into the
// zero-initialized chunk buffer of length dim. Chunk buffers are added into
// out (also length dim) in chunk order. out is overwritten.
// Memory is n_chunks * dim doubles; intended for batch-sized n.
template <typename AccumFn>
void indexed_accumulate(std::size_t n, std::size_t dim, Exec exec,
                        std::span<double> out, AccumFn&& accum) {
  for (double& v : out) v = 0.0;
  if (n == 0 || dim == 0) return;
  const std::size_t n_chunks = (n + kReductionChunk - 1) / kReductionChunk;
  std::vector<double> partial(n_chunks * dim, 0.0);
  detail::for_each_chunk(n_chunks, exec, [&](std::size_t c) {
    const std::size_t lo = c * kReductionChunk;
    const std::size_t hi = std::min(n, lo + kReductionChunk);
    std::span<double> chunk(partial.data() + c * dim, dim);
    for (std::size_t i = lo; i < hi; ++i) accum(i, chunk);
  });
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const double* chunk = partial.data() + c * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] += chunk[j];
  }
}

}  // namespace tiepref
