#include "moxgate/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "moxgate/errors.hpp"

namespace moxgate {

namespace {

// splitmix64, used to hash fork labels into fresh seeds.
std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

Rng Rng::fork(const std::string& label) const {
    std::uint64_t h = seed_;
    for (unsigned char c : label) {
        h = splitmix64(h ^ static_cast<std::uint64_t>(c));
    }
    return Rng(splitmix64(h));
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    // u clamped away from 0 so log() stays finite.
    double u = uniform();
    if (u <= 0.0) u = 0x1.0p-53;
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::size_t Rng::index(std::size_t n) {
    if (n == 0) throw ValueError("Rng::index: n must be positive");
    // Rejection sampling keeps the distribution exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return static_cast<std::size_t>(x % n);
}

std::string Rng::serialize_state() const {
    std::ostringstream out;
    out << seed_ << ' ' << engine_;
    return out.str();
}

void Rng::restore_state(const std::string& text) {
    std::istringstream in(text);
    in >> seed_ >> engine_;
    if (!in) throw ValueError("Rng::restore_state: malformed state string");
}

}  // namespace moxgate
