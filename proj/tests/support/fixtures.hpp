#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "scene/survival.hpp"

namespace scene::testing {

struct FuzzOptions {
  int min_n = 10;
  int max_n = 500;
  double max_censoring = 0.8;
  int p = 2;
  bool ties = true;  // round times to one decimal
};

/// Random right-censored dataset with tied times when `ties` is set.
inline Dataset fuzz_dataset(std::mt19937_64& rng, const FuzzOptions& opt = {}) {
  std::uniform_int_distribution<int> size(opt.min_n, opt.max_n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int n = size(rng);
  const double censor_prob = opt.max_censoring * unit(rng);
  std::vector<double> times;
  std::vector<std::uint8_t> events;
  RowMatrix x(n, opt.p);
  for (int i = 0; i < n; ++i) {
    const double t = 0.1 + 10.0 * unit(rng);
    times.push_back(opt.ties ? std::round(t * 10.0) / 10.0 + 0.1 : t);
    events.push_back(unit(rng) >= censor_prob ? 1 : 0);
    for (int j = 0; j < opt.p; ++j) x(i, j) = 2.0 * unit(rng) - 1.0;
  }
  return Dataset(std::move(times), std::move(events), std::move(x));
}

inline Dataset make_dataset(std::vector<double> times, std::vector<std::uint8_t> events, int p = 1) {
  RowMatrix x = RowMatrix::Zero(static_cast<Eigen::Index>(times.size()), p);
  return Dataset(std::move(times), std::move(events), std::move(x));
}

}  // namespace scene::testing
