#pragma once

#include "scgfm/graph.hpp"

#include <cstdint>
#include <vector>

namespace scgfm {

// Dense clique core with a pendant path of tail nodes hanging off a random
// core vertex. Label 0.
Graph clique_with_tail(int n, std::uint64_t seed);

// Cycle through all n nodes plus ~n/4 random chords. Label 1.
Graph cycle_with_chords(int n, std::uint64_t seed);

// Balanced two-class corpus of the above, sizes uniform in [n_min, n_max].
std::vector<Graph> two_class_corpus(int count, int n_min, int n_max, std::uint64_t seed);

}  // namespace scgfm
