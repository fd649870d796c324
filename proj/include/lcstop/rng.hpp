#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace lcstop {

/// Philox4x32-10 counter-based block function (Salmon et al., SC'11).
/// Maps a 128-bit counter and 64-bit key to 128 random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Derives a stream id from a seed, a purpose tag and an index.
/// Every randomized routine draws from streams derived this way, so results
/// depend only on (seed, tag, index) and never on scheduling.
std::uint64_t derive_stream(std::uint64_t seed, std::string_view tag, std::uint64_t index) noexcept;

/// Deterministic random stream over Philox: the key is the run seed, the
/// upper counter words hold the stream id and the lower words a block index.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t stream_id) noexcept;

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double normal() noexcept;
    double exponential(double rate) noexcept;
    /// Poisson variate by sequential inversion; intended for small means.
    std::uint64_t poisson(double mean) noexcept;

private:
    void refill() noexcept;

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int used_ = 4;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lcstop
