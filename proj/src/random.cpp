#include "plsm/random.hpp"

#include <algorithm>
#include <numeric>

namespace plsm {

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k)
{
    k = std::min(k, n);
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // partial Fisher-Yates
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace plsm
