#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tailsim {

// splitmix64 step; used to mix seeds, not as the main generator
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash_stream_name(std::string_view name) {
    // FNV-1a
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// One named substream of a master seed. Streams with different names are
// decorrelated, so drawing more from one stream never shifts another.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::string_view name) {
        std::uint64_t s = master_seed ^ hash_stream_name(name);
        splitmix64_next(s);
        gen_.seed(splitmix64_next(s));
    }

    // uniform on [0, 1), 53-bit resolution, identical on every platform
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double exponential(double rate) {
        return -std::log1p(-uniform()) / rate;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace tailsim
