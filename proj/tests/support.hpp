#pragma once

// Shared fixtures for the unit and acceptance suites; the generators live in
// the verify module so the CLI's property runner uses the same distributions.

#include "navprobe/verify.hpp"

namespace navprobe::testing {

inline TreeEnsemble random_ensemble(uint64_t seed, int max_trees, int max_depth, int n_features) {
  return random_fixture_ensemble(seed, max_trees, max_depth, n_features);
}

inline Vec random_input(Rng& rng, int n_features) { return random_fixture_input(rng, n_features); }

}  // namespace navprobe::testing
