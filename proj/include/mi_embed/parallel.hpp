#pragma once

#include <cstddef>
#include <functional>

namespace mi_embed {

/// Worker count from MI_EMBED_WORKERS, falling back to hardware concurrency.
std::size_t default_workers();

/// Runs job(i) for i in [0, n) on up to `workers` threads. Rethrows the
/// exception of the lowest failing index after all jobs finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& job);

}  // namespace mi_embed
