#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisetrans/rng.hpp"

namespace noisetrans {

/// A one-dimensional empirical sample together with its ascending order
/// statistics.
struct SampleVector {
  std::vector<double> values;
  std::vector<double> sorted;

  SampleVector() = default;
  explicit SampleVector(std::vector<double> v);
  std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
};

/// Population mean and population (1/N) standard deviation over all elements.
std::pair<double, double> empirical_moments(const NoiseField& field);

/// 1-Wasserstein distance between equal-size empirical distributions,
/// evaluated channel-wise from order statistics:
///   d = 1/(S*C) * sum_c sum_i |X^c_(i) - Y^c_(i)|
/// where S is the per-channel sample count (H*W for flattened noise planes).
double w1_sorted(std::span<const SampleVector> x, std::span<const SampleVector> y);
double w1_sorted(const SampleVector& x, const SampleVector& y);
/// Convenience overload splitting two equally shaped fields by channel.
double w1_sorted(const NoiseField& x, const NoiseField& y);

/// Exact optimal-transport cost with |x - y| ground cost, as a minimum-mean
/// perfect matching: exhaustive over all permutations for n <= 8, an O(n^3)
/// shortest-augmenting-path assignment solve for n <= 64. Same 1/n
/// normalisation as single-channel w1_sorted.
double w1_oracle(const SampleVector& x, const SampleVector& y);

/// Minimum-cost assignment on a dense square cost matrix (row-major); returns
/// the total cost and fills column_of_row.
double solve_assignment(std::span<const double> cost, std::int64_t n,
                        std::vector<std::int64_t>& column_of_row);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> edges;        // bins + 1 entries
  std::vector<std::int64_t> counts; // out-of-range samples clamp into edge bins
  std::vector<double> density;      // integrates to 1

  std::int64_t total() const;
  std::string to_csv() const;       // columns: edge_lo, edge_hi, count, density
  std::string to_json() const;
};

/// Uniform histogram over [lo, hi); the final bin is closed. Out-of-range
/// samples are clamped into the first/last bin.
Histogram histogram(std::span<const double> samples, std::int64_t bins, double lo, double hi);

}  // namespace noisetrans
