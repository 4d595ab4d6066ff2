#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace grmtl {

// Seeded generator whose derived draws do not depend on the standard
// library's distribution implementations, so synthetic files and fold plans
// are byte-identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    // Uniform integer in [0, bound); bound must be positive.
    std::uint64_t below(std::uint64_t bound);
    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace grmtl
