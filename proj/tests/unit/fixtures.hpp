#pragma once

// Small random fixtures for property tests. Each helper draws from its own
// Philox stream so a failing case can be replayed from (seed, stream).

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "etsi/rng.hpp"
#include "etsi/trial_data.hpp"

namespace fixtures {

inline constexpr std::uint64_t kSeed = 20261015;

inline std::vector<double> uniform(std::size_t n, double lo, double hi, std::uint64_t stream) {
  etsi::Philox4x32 rng(kSeed, stream);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline std::vector<double> normal(std::size_t n, double mean, double sd, std::uint64_t stream) {
  etsi::Philox4x32 rng(kSeed, stream);
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

/// Role-A study, n1 treated then n0 controls. Y depends on S, W and arm.
inline etsi::Study small_study_a(std::size_t n1, std::size_t n0, std::uint64_t stream) {
  etsi::Philox4x32 rng(kSeed, stream);
  std::uniform_real_distribution<double> w(0.0, 4.0);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<etsi::Subject> subjects;
  for (int arm : {1, 0}) {
    for (std::size_t i = 0; i < (arm ? n1 : n0); ++i) {
      etsi::Subject s;
      s.arm = arm;
      s.w = w(rng);
      s.s = 1.0 + 0.5 * arm + e(rng);
      s.y = 0.8 * *s.s + 0.3 * s.w + 0.5 * arm + 0.4 * e(rng);
      subjects.push_back(s);
    }
  }
  return etsi::Study::create(etsi::Role::A, std::move(subjects));
}

/// Role-B study: delta=1 exactly when w lies in [cut, inf).
inline etsi::Study small_study_b(std::size_t n1, std::size_t n0, double cut,
                                 std::uint64_t stream) {
  etsi::Philox4x32 rng(kSeed, stream);
  std::uniform_real_distribution<double> w(0.0, 4.0);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<etsi::Subject> subjects;
  for (int arm : {1, 0}) {
    for (std::size_t i = 0; i < (arm ? n1 : n0); ++i) {
      etsi::Subject s;
      s.arm = arm;
      s.w = w(rng);
      const double sv = 1.0 + 0.5 * arm + e(rng);
      const double yv = 0.8 * sv + 0.3 * s.w + 0.5 * arm + 0.4 * e(rng);
      s.delta = s.w >= cut ? 1 : 0;
      if (*s.delta == 1) {
        s.s = sv;
      } else {
        s.y = yv;
      }
      subjects.push_back(s);
    }
  }
  return etsi::Study::create(etsi::Role::B, std::move(subjects));
}

/// Copy with every Y replaced by a * y + b.
inline etsi::Study affine_y(const etsi::Study& study, double a, double b) {
  std::vector<etsi::Subject> subjects(study.subjects().begin(), study.subjects().end());
  for (etsi::Subject& s : subjects) {
    if (s.y) s.y = a * *s.y + b;
  }
  return etsi::Study::create(study.role(), std::move(subjects));
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

}  // namespace fixtures
