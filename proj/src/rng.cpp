#include "rla/rng.hpp"

#include "rla/errors.hpp"

namespace rla {

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t CounterRng::raw(std::uint64_t slot, std::uint64_t attempt) const noexcept {
    return mix64(mix64(mix64(seed_) ^ slot) + attempt * 0xd1b54a32d192ed03ULL);
}

std::uint64_t CounterRng::below(std::uint64_t n, std::uint64_t slot) const {
    if (n == 0) throw ConfigError("cannot draw from an empty range");
    // Lemire's multiply-shift with rejection of the biased low region.
    const std::uint64_t threshold = (0 - n) % n;
    for (std::uint64_t attempt = 0;; ++attempt) {
        const unsigned __int128 m = static_cast<unsigned __int128>(raw(slot, attempt)) * n;
        if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
    }
}

double CounterRng::unit(std::uint64_t slot) const noexcept {
    return static_cast<double>(raw(slot) >> 11) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix64(mix64(seed ^ 0x5851f42d4c957f2dULL) + mix64(index));
}

}  // namespace rla
