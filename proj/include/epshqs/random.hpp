#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace epshqs {

using Rng = std::mt19937_64;
using SampleId = std::int64_t;

// Derives an independent engine from a base seed and a stream tag, so that
// e.g. teacher initialisation and batch selection never share draws.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x65707371u};
    return Rng(seq);
}

inline std::uint64_t mix_seeds(std::initializer_list<std::uint64_t> parts) {
    // splitmix64 finaliser folded over the parts
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (auto p : parts) {
        std::uint64_t z = h ^ (p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        h = z ^ (z >> 31);
    }
    return h;
}

// Random engine plus the counter that hands out sample ids.
struct SampleStream {
    Rng engine;
    SampleId next_id = 0;

    explicit SampleStream(std::uint64_t seed, SampleId first_id = 0)
        : engine(make_rng(seed, 0x73616d70ull)), next_id(first_id) {}
    SampleStream(Rng rng, SampleId first_id) : engine(std::move(rng)), next_id(first_id) {}

    SampleId take_id() { return next_id++; }
};

}  // namespace epshqs
