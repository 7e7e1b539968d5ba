#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace expertgen {

// 64-bit FNV-1a. Used for content-addressed ids, cache keys and seed
// derivation; not for anything adversarial.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string hex16(std::uint64_t value);

// Collapse runs of whitespace to single spaces and trim the ends.
std::string normalize_whitespace(std::string_view text);

// Lowercase + trim; topic labels are stored in this form.
std::string normalize_label(std::string_view label);

std::vector<std::string> split_whitespace(std::string_view text);

// Whitespace-token count; the fallback unit for token accounting and the
// default length unit for preference metrics.
std::size_t count_tokens(std::string_view text);

std::string lower_ascii(std::string_view s);

bool contains_ci(std::string_view haystack, std::string_view needle);

// Deterministic RNG. mt19937_64 output is fully specified by the standard;
// the derived draws below avoid std distributions, whose results vary across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, bound), bound > 0; rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound);

    // Uniform in [0, 1).
    double uniform01();

    double normal();

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

    // k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> pick_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace expertgen
