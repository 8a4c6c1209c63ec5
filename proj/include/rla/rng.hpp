#pragma once

#include <cstdint>

namespace rla {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-mode generator: every draw is a pure function of (seed, slot), so a
/// transcript can be replayed from any point and round-parallel draws do not
/// depend on the order in which slots are consumed.
///
/// The auditor uses two slots per iteration: 2*(i-1) for the batch draw and
/// 2*(i-1)+1 for the row (or group) draw of iteration i.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    /// Raw 64-bit output for (slot, attempt).
    std::uint64_t raw(std::uint64_t slot, std::uint64_t attempt = 0) const noexcept;

    /// Unbiased integer in [0, n); rejection retries stay inside the slot.
    std::uint64_t below(std::uint64_t n, std::uint64_t slot) const;

    /// Uniform double in [0, 1) from 53 bits of the slot.
    double unit(std::uint64_t slot) const noexcept;

    static std::uint64_t batch_slot(std::uint64_t iteration) noexcept { return 2 * (iteration - 1); }
    static std::uint64_t row_slot(std::uint64_t iteration) noexcept { return 2 * (iteration - 1) + 1; }

private:
    std::uint64_t seed_;
};

/// Independent stream seed for (seed, index), e.g. one per simulation trial.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace rla
