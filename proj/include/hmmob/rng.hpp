#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Core>

namespace hmmob {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of the `index`-th independent stream derived from `seed`:
/// mix64(seed XOR index). Used for chains, replicates and Monte-Carlo shards.
constexpr std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(seed ^ index);
}

double uniform01(Rng& rng);

/// log of a Gamma(shape, 1) draw; stays finite for shapes well below 1.
double sample_log_gamma(double shape, Rng& rng);

/// Dirichlet draw normalised in log space, so tiny concentrations do not
/// collapse to an all-zero vector.
Eigen::VectorXd sample_dirichlet(const Eigen::VectorXd& alpha, Rng& rng);

/// Index drawn proportionally to nonnegative `weights` (need not sum to 1).
int sample_categorical(std::span<const double> weights, Rng& rng);
int sample_categorical(const Eigen::VectorXd& weights, Rng& rng);

}  // namespace hmmob
