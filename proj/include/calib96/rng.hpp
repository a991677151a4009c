#pragma once

#include <cstdint>
#include <string_view>

#include <Eigen/Core>

namespace calib96 {

// Deterministic PRNG used everywhere in the library. Wraps a 64-bit xoshiro-style
// generator seeded through splitmix64 and implements its own uniform and normal
// draws so that streams are reproducible independent of the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double u01();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (cached spare).
  double normal();

  // Integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
  Eigen::MatrixXd uniform_box(Eigen::Index rows, const Eigen::VectorXd& lo,
                              const Eigen::VectorXd& hi);

 private:
  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t fnv1a64(std::string_view s);

// Derives per-stage seeds from one root seed so stages can be rerun in
// isolation. Same (root, tag, index) always gives the same child seed.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t root) : root_(root) {}
  std::uint64_t derive(std::string_view tag, std::uint64_t index = 0) const;
  std::uint64_t root() const { return root_; }

 private:
  std::uint64_t root_;
};

}  // namespace calib96
