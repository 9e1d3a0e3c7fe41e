#include "noisetrans/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace noisetrans {

SampleVector::SampleVector(std::vector<double> v) : values(std::move(v)), sorted(values) {
  std::stable_sort(sorted.begin(), sorted.end());
}

std::pair<double, double> empirical_moments(const NoiseField& field) {
  if (field.values.empty()) throw std::invalid_argument("empirical_moments: empty field");
  // NoiseField caches population moments at construction, including the exact
  // degenerate (constant-field) case.
  return {field.mu_hat, field.sigma_hat};
}

double w1_sorted(std::span<const SampleVector> x, std::span<const SampleVector> y) {
  if (x.size() != y.size() || x.empty()) {
    throw std::invalid_argument("w1_sorted: channel counts differ (" + std::to_string(x.size()) +
                                " vs " + std::to_string(y.size()) + ")");
  }
  const std::int64_t per_channel = x[0].size();
  double acc = 0.0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    if (x[c].size() != per_channel || y[c].size() != per_channel) {
      throw std::invalid_argument("w1_sorted: channel " + std::to_string(c) + " has " +
                                  std::to_string(x[c].size()) + " vs " + std::to_string(y[c].size()) +
                                  " samples; all channels need " + std::to_string(per_channel));
    }
    for (std::int64_t i = 0; i < per_channel; ++i) {
      acc += std::abs(x[c].sorted[static_cast<std::size_t>(i)] -
                      y[c].sorted[static_cast<std::size_t>(i)]);
    }
  }
  return acc / (static_cast<double>(per_channel) * static_cast<double>(x.size()));
}

double w1_sorted(const SampleVector& x, const SampleVector& y) {
  return w1_sorted(std::span<const SampleVector>(&x, 1), std::span<const SampleVector>(&y, 1));
}

double w1_sorted(const NoiseField& x, const NoiseField& y) {
  if (x.height != y.height || x.width != y.width || x.channels != y.channels) {
    throw std::invalid_argument("w1_sorted: field shapes differ");
  }
  const auto plane = static_cast<std::size_t>(x.height * x.width);
  std::vector<SampleVector> xs, ys;
  xs.reserve(static_cast<std::size_t>(x.channels));
  ys.reserve(static_cast<std::size_t>(x.channels));
  for (std::int64_t c = 0; c < x.channels; ++c) {
    const auto off = static_cast<std::size_t>(c) * plane;
    xs.emplace_back(std::vector<double>(x.values.begin() + off, x.values.begin() + off + plane));
    ys.emplace_back(std::vector<double>(y.values.begin() + off, y.values.begin() + off + plane));
  }
  return w1_sorted(xs, ys);
}

namespace {

double exhaustive_matching(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) cost += std::abs(x[i] - y[perm[i]]);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

double solve_assignment(std::span<const double> cost, std::int64_t n,
                        std::vector<std::int64_t>& column_of_row) {
  if (n <= 0 || static_cast<std::int64_t>(cost.size()) != n * n) {
    throw std::invalid_argument("solve_assignment: cost matrix must be n*n");
  }
  // Shortest augmenting path with potentials (Jonker-Volgenant style), 1-based.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<std::int64_t> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<std::int64_t> way(static_cast<std::size_t>(n) + 1, 0);
  for (std::int64_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::int64_t j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const std::int64_t i0 = p[static_cast<std::size_t>(j0)];
      std::int64_t j1 = 0;
      double delta = inf;
      for (std::int64_t j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost[static_cast<std::size_t>((i0 - 1) * n + (j - 1))] -
                           u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (std::int64_t j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const std::int64_t j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  column_of_row.assign(static_cast<std::size_t>(n), -1);
  double total = 0.0;
  for (std::int64_t j = 1; j <= n; ++j) {
    const std::int64_t i = p[static_cast<std::size_t>(j)];
    if (i == 0) continue;
    column_of_row[static_cast<std::size_t>(i - 1)] = j - 1;
    total += cost[static_cast<std::size_t>((i - 1) * n + (j - 1))];
  }
  return total;
}

double w1_oracle(const SampleVector& x, const SampleVector& y) {
  const std::int64_t n = x.size();
  if (n != y.size() || n == 0) {
    throw std::invalid_argument("w1_oracle: sample sizes differ (" + std::to_string(n) + " vs " +
                                std::to_string(y.size()) + ")");
  }
  if (n > 64) {
    throw std::invalid_argument("w1_oracle: n = " + std::to_string(n) + " exceeds the limit of 64");
  }
  if (n <= 8) {
    return exhaustive_matching(x.values, y.values) / static_cast<double>(n);
  }
  std::vector<double> cost(static_cast<std::size_t>(n * n));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) {
      cost[static_cast<std::size_t>(i * n + j)] =
          std::abs(x.values[static_cast<std::size_t>(i)] - y.values[static_cast<std::size_t>(j)]);
    }
  }
  std::vector<std::int64_t> assignment;
  return solve_assignment(cost, n, assignment) / static_cast<double>(n);
}

std::int64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::string Histogram::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "edge_lo,edge_hi,count,density\n";
  for (std::size_t i = 0; i < counts.size(); ++i) {
    os << edges[i] << ',' << edges[i + 1] << ',' << counts[i] << ',' << density[i] << '\n';
  }
  return os.str();
}

std::string Histogram::to_json() const {
  std::ostringstream os;
  os.precision(17);
  auto dump = [&os](const char* key, const auto& vec) {
    os << '"' << key << "\":[";
    for (std::size_t i = 0; i < vec.size(); ++i) {
      if (i) os << ',';
      os << vec[i];
    }
    os << ']';
  };
  os << '{';
  dump("edges", edges);
  os << ',';
  dump("counts", counts);
  os << ',';
  dump("density", density);
  os << '}';
  return os.str();
}

Histogram histogram(std::span<const double> samples, std::int64_t bins, double lo, double hi) {
  if (bins < 1) throw std::invalid_argument("histogram: need at least one bin");
  if (!(lo < hi)) throw std::invalid_argument("histogram: invalid range [lo, hi)");
  Histogram h;
  h.lo = lo;
  h.hi = hi;
  const double width = (hi - lo) / static_cast<double>(bins);
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (std::int64_t i = 0; i <= bins; ++i) {
    h.edges[static_cast<std::size_t>(i)] = lo + width * static_cast<double>(i);
  }
  h.edges.back() = hi;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double v : samples) {
    auto bin = static_cast<std::int64_t>(std::floor((v - lo) / width));
    bin = std::clamp<std::int64_t>(bin, 0, bins - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  h.density.assign(static_cast<std::size_t>(bins), 0.0);
  const auto n = static_cast<double>(samples.size());
  if (n > 0) {
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      h.density[i] = static_cast<double>(h.counts[i]) / (n * width);
    }
  }
  return h;
}

}  // namespace noisetrans
