/**
 * derisk - divergence-based empirical risk toolkit
 *
 * This code is released under the
 * Apache License Version 2.0 http://www.apache.org/licenses/.
 */
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace derisk {

// splitmix64 finalizer; used to derive independent stream seeds from one run seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) {
  std::uint64_t h = base;
  for (char c : tag) h = mix_seed(h ^ static_cast<std::uint64_t>(static_cast<unsigned char>(c)));
  return mix_seed(h ^ index);
}

// Flat (uniform) sampler on the probability simplex: normalized i.i.d. Exp(1) draws.
inline Eigen::VectorXd sample_simplex(Eigen::Index k, std::mt19937_64& rng) {
  std::exponential_distribution<double> exp1(1.0);
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v[i] = exp1(rng);
  return v / v.sum();
}

}  // namespace derisk
