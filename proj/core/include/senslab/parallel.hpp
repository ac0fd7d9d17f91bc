#pragma once

#include <cstddef>
#include <functional>

namespace senslab {

/// Resolves a requested worker count: 0 means one worker per hardware thread.
std::size_t resolve_threads(std::size_t requested) noexcept;

/// Runs fn(i) for i in [0, count) over up to `threads` workers with a static
/// contiguous partition. The first exception (lowest index) is rethrown after
/// all workers join.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace senslab
