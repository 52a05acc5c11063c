#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace survtreeful {

/// Counter-based pseudo-random generator with splittable child streams.
///
/// Output j of a stream keyed by k is mix64(k + j * PHI), so a stream is a
/// pure function of (key, counter). Consumers derive independent child
/// streams from (key, purpose-label) or (key, index); adding a sampler in
/// one place never perturbs the draws seen elsewhere. All variates are
/// produced by explicit inverse transforms, keeping every byte of output
/// identical across platforms and thread counts.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0xd1b54a32d192ed03ULL)) {}

    std::uint64_t next_u64() { return mix64(key_ + (++counter_) * kPhi); }

    /// Uniform on [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1); safe as a log/logit argument.
    double uniform_pos() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    /// Standard logistic variate (location 0, scale 1).
    double logistic() {
        const double u = uniform_pos();
        return std::log(u / (1.0 - u));
    }

    Rng child(std::string_view label) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
        for (const char c : label) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        return Rng(mix64(key_ ^ mix64(h)), 0);
    }

    Rng child(std::uint64_t index) const {
        return Rng(mix64(key_ ^ mix64(0x94d049bb133111ebULL + index)), 0);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    Rng(std::uint64_t key, std::uint64_t counter) : key_(key), counter_(counter) {}

    static constexpr std::uint64_t kPhi = 0x9e3779b97f4a7c15ULL;

    static std::uint64_t mix64(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace survtreeful
