#pragma once

#include <cstddef>
#include <functional>

namespace rareis {

/// Worker count from the RAREIS_WORKERS environment variable, else 1.
std::size_t default_worker_count();

/// Splits [0, n) into min(workers, n) contiguous chunks and calls
/// body(chunk, begin, end) for each on its own thread. Chunk boundaries
/// depend only on (n, workers); bodies write into index-addressed output so
/// results do not depend on scheduling. The first exception thrown by any
/// chunk is rethrown on the caller.
void parallel_chunks(std::size_t n, std::size_t workers,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body);

/// parallel_chunks without the chunk index.
void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace rareis
