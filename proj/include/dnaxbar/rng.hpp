#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dnaxbar {

// Counter-addressed random streams. A stream is fully determined by
// (seed, label, index), so trials can be drawn in any order or in parallel.
class Stream {
public:
    Stream(std::uint64_t seed, std::string_view label, std::uint64_t index)
        : engine_(mix(seed, label, index)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits; independent of the standard
    // library's distribution implementations.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    static std::uint64_t splitmix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    static std::uint64_t mix(std::uint64_t seed, std::string_view label, std::uint64_t index) {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the label
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return splitmix(splitmix(seed ^ h) + splitmix(index + 0x632be59bd9b4e019ULL));
    }

    std::mt19937_64 engine_;
};

}  // namespace dnaxbar
