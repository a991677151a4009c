#pragma once

#include <cstdint>

#include "calib96/linalg.hpp"

namespace calib96 {

// Sobol sequence (Joe-Kuo direction numbers, dimensions 1..8), optionally
// randomized with a seeded digital shift. Points are returned in [0,1)^d,
// starting at sequence index 1.
Mat sobol_unit(Eigen::Index n, Eigen::Index d);
Mat sobol_unit_scrambled(Eigen::Index n, Eigen::Index d, std::uint64_t seed);

// Scrambled Sobol points mapped into the box [lo, hi].
Mat sobol_box(Eigen::Index n, const Vec& lo, const Vec& hi, std::uint64_t seed);

// Latin hypercube in [lo, hi]: one point per stratum per dimension with
// independent stratum permutations.
Mat lhs_box(Eigen::Index n, const Vec& lo, const Vec& hi, std::uint64_t seed);

// Best of `restarts` seeded LHS draws by the maximin (largest smallest pairwise
// distance) criterion, measured in the unit cube.
Mat maximin_lhs_box(Eigen::Index n, const Vec& lo, const Vec& hi,
                    std::uint64_t seed, int restarts = 100);

}  // namespace calib96
