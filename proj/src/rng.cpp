#include "hyqal/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace hyqal {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
    return fnv1a64(s.data(), s.size(), seed);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = fnv1a64(&seed, sizeof(seed));
    for (std::uint64_t t : tags) {
        h = fnv1a64(&t, sizeof(t), h);
    }
    return h;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = fnv1a64(&seed, sizeof(seed));
    return fnv1a64(tag, h);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) {
        throw std::invalid_argument("Rng::uniform_int: n must be positive");
    }
    // Rejection sampling keeps the draw unbiased for any n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    // Box-Muller, trigonometric form. u1 is kept away from 0.
    double u1 = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::string Rng::state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream is(s);
    is >> engine_;
    if (is.fail()) {
        throw std::runtime_error("Rng::set_state: malformed state string");
    }
}

} // namespace hyqal
