#include "calib96/qmc.hpp"

#include <array>
#include <limits>
#include <numeric>
#include <vector>

#include "calib96/errors.hpp"
#include "calib96/rng.hpp"

namespace calib96 {

namespace {

constexpr int kBits = 32;

struct SobolDim {
  int s;       // polynomial degree
  int a;       // polynomial coefficients (excluding leading/trailing 1)
  int m[5];    // initial direction values
};

// Joe & Kuo (2008) direction numbers for dimensions 2..8; dimension 1 is the
// van der Corput sequence in base 2.
constexpr std::array<SobolDim, 7> kJoeKuo = {{
    {1, 0, {1, 0, 0, 0, 0}},
    {2, 1, {1, 3, 0, 0, 0}},
    {3, 1, {1, 3, 1, 0, 0}},
    {3, 2, {1, 1, 1, 0, 0}},
    {4, 1, {1, 1, 3, 3, 0}},
    {4, 4, {1, 3, 5, 13, 0}},
    {5, 2, {1, 1, 5, 5, 17}},
}};

std::vector<std::uint32_t> direction_numbers(Eigen::Index dim_index) {
  std::vector<std::uint32_t> v(kBits);
  if (dim_index == 0) {
    for (int k = 0; k < kBits; ++k) v[k] = 1u << (31 - k);
    return v;
  }
  const SobolDim& d = kJoeKuo.at(static_cast<std::size_t>(dim_index - 1));
  for (int k = 0; k < d.s; ++k)
    v[k] = static_cast<std::uint32_t>(d.m[k]) << (31 - k);
  for (int k = d.s; k < kBits; ++k) {
    v[k] = v[k - d.s] ^ (v[k - d.s] >> d.s);
    for (int i = 1; i < d.s; ++i)
      if ((d.a >> (d.s - 1 - i)) & 1) v[k] ^= v[k - i];
  }
  return v;
}

Mat sobol_bits(Eigen::Index n, Eigen::Index d, const std::vector<std::uint32_t>& shift) {
  if (d < 1 || d > 8) throw ConfigError("sobol: dimension must be in 1..8");
  std::vector<std::vector<std::uint32_t>> v;
  v.reserve(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) v.push_back(direction_numbers(j));

  Mat out(n, d);
  std::vector<std::uint32_t> x(static_cast<std::size_t>(d), 0);
  // Gray-code update; sequence index starts at 1 so the all-zero point is skipped.
  for (Eigen::Index i = 0; i < n; ++i) {
    std::uint64_t idx = static_cast<std::uint64_t>(i);
    int c = 0;
    while (idx & 1) {
      idx >>= 1;
      ++c;
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      x[static_cast<std::size_t>(j)] ^= v[static_cast<std::size_t>(j)][c];
      const std::uint32_t bits = x[static_cast<std::size_t>(j)] ^ shift[static_cast<std::size_t>(j)];
      out(i, j) = static_cast<double>(bits) * 0x1.0p-32;
    }
  }
  return out;
}

}  // namespace

Mat sobol_unit(Eigen::Index n, Eigen::Index d) {
  std::vector<std::uint32_t> shift(static_cast<std::size_t>(d), 0);
  return sobol_bits(n, d, shift);
}

Mat sobol_unit_scrambled(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint32_t> shift(static_cast<std::size_t>(d));
  for (auto& s : shift) s = static_cast<std::uint32_t>(rng.next_u64() >> 32);
  return sobol_bits(n, d, shift);
}

Mat sobol_box(Eigen::Index n, const Vec& lo, const Vec& hi, std::uint64_t seed) {
  Mat u = sobol_unit_scrambled(n, lo.size(), seed);
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    u.col(j) = lo[j] + (hi[j] - lo[j]) * u.col(j).array();
  return u;
}

Mat lhs_box(Eigen::Index n, const Vec& lo, const Vec& hi, std::uint64_t seed) {
  const Eigen::Index d = lo.size();
  Rng rng(seed);
  Mat out(n, d);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    for (Eigen::Index i = n - 1; i > 0; --i)
      std::swap(perm[static_cast<std::size_t>(i)],
                perm[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = (static_cast<double>(perm[static_cast<std::size_t>(i)]) + rng.u01()) /
                       static_cast<double>(n);
      out(i, j) = lo[j] + (hi[j] - lo[j]) * u;
    }
  }
  return out;
}

Mat maximin_lhs_box(Eigen::Index n, const Vec& lo, const Vec& hi,
                    std::uint64_t seed, int restarts) {
  Vec zero = Vec::Zero(lo.size());
  Vec one = Vec::Ones(lo.size());
  Mat best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Mat unit = lhs_box(n, zero, one, seed + static_cast<std::uint64_t>(r));
    double score = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j)
        score = std::min(score, (unit.row(i) - unit.row(j)).squaredNorm());
    if (score > best_score) {
      best_score = score;
      best = unit;
    }
  }
  for (Eigen::Index j = 0; j < lo.size(); ++j)
    best.col(j) = lo[j] + (hi[j] - lo[j]) * best.col(j).array();
  return best;
}

}  // namespace calib96
