#pragma once

#include <cstddef>
#include <functional>

namespace stf {

/// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
/// Chunk boundaries depend only on n and chunk_size, never on the thread
/// count, so any reduction done per chunk and combined in chunk order is
/// bit-identical for 1 or many threads.
void parallel_for_chunks(std::size_t n, std::size_t chunk_size, int threads,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

std::size_t chunk_count(std::size_t n, std::size_t chunk_size);

}  // namespace stf
