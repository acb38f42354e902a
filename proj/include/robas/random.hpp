#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace robas {

using Rng = std::mt19937_64;

// Stream tags keep train data, test data, inference and solver randomness on
// disjoint generators.
enum class Stream : std::uint64_t {
    Train = 1,
    Test = 2,
    DirichletWeights = 3,
    PriorAtoms = 4,
    Optimizer = 5,
    Predictive = 6,
    Discretization = 7,
    Reference = 8,
    Probe = 9,
};

/// Deterministic generator keyed by (root seed, stream tag, indices...).
inline Rng make_stream(std::uint64_t root, Stream tag, std::initializer_list<std::uint64_t> keys = {}) {
    std::vector<std::uint32_t> material;
    auto push = [&](std::uint64_t v) {
        material.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        material.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(root);
    push(static_cast<std::uint64_t>(tag));
    for (auto k : keys) push(k);
    std::seed_seq seq(material.begin(), material.end());
    return Rng(seq);
}

} // namespace robas
