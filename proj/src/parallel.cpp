#include "stf/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace stf {

std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
    return chunk_size == 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

void parallel_for_chunks(std::size_t n, std::size_t chunk_size, int threads,
                         const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t chunks = chunk_count(n, chunk_size);
    if (threads <= 1 || chunks <= 1) {
        for (std::size_t c = 0; c < chunks; ++c)
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= chunks) return;
            fn(c, c * chunk_size, std::min(n, (c + 1) * chunk_size));
        }
    };
    std::vector<std::thread> pool;
    const std::size_t nt = std::min<std::size_t>(threads, chunks);
    pool.reserve(nt - 1);
    for (std::size_t i = 0; i + 1 < nt; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

}  // namespace stf
