#ifndef SAEPROBE_RANDOM_HPP
#define SAEPROBE_RANDOM_HPP

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace saeprobe {

std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent stream seed from a parent seed and a stage label.
/// Used so that one global seed fans out into per-stage seeds reproducibly.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index);

/// xoshiro256** generator. All distributions are implemented here rather than
/// through <random> so that streams are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next();
    /// Uniform in [0, 1) with 53 bits of precision.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);
    /// Standard normal via Box-Muller.
    double normal();

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t s_[4];
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace saeprobe

#endif  // SAEPROBE_RANDOM_HPP
