/*
 * Copyright 2026 The GSE Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "gse/error.hpp"
#include "gse/matrix.hpp"
#include "gse/random.hpp"

namespace gse {

struct KMeansResult {
  Matrix centroids;                     // k x d
  std::vector<std::size_t> assignment;  // per row, in [0, k)
  double inertia = 0.0;                 // within-cluster sum of squares
  int iterations = 0;
};

inline std::size_t nearest_centroid(std::span<const double> x, const Matrix& centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(x, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Lloyd's algorithm from a k-means++ seeding. Stops when assignments are
// stable or after max_iters rounds. An emptied cluster is re-seeded with the
// point farthest from its centroid.
inline KMeansResult kmeans(const Matrix& x, std::size_t k, std::uint64_t seed, int max_iters = 300) {
  const std::size_t n = x.rows(), d = x.cols();
  if (k == 0) throw Error("kmeans", "fit", "k must be >= 1");
  if (k > n)
    throw Error("kmeans", "fit",
                "k = " + std::to_string(k) + " exceeds the number of rows (" + std::to_string(n) + ")");

  Rng rng(seed);
  KMeansResult r;
  r.centroids = Matrix(k, d);
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.index(n);
  std::copy(x.row(first).begin(), x.row(first).end(), r.centroids.row(0).begin());
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = std::min(dist[i], squared_distance(x.row(i), r.centroids.row(c - 1)));
    double total = 0.0;
    for (double v : dist) total += v;
    // All remaining points coincide with chosen centres: take the next unused index.
    const std::size_t pick = total > 0.0 ? rng.weighted(dist) : (first + c) % n;
    std::copy(x.row(pick).begin(), x.row(pick).end(), r.centroids.row(c).begin());
  }

  r.assignment.assign(n, k);  // sentinel forces a first update
  for (r.iterations = 0; r.iterations < max_iters; ++r.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_centroid(x.row(i), r.centroids);
      if (c != r.assignment[i]) {
        r.assignment[i] = c;
        changed = true;
      }
    }
    if (!changed) break;

    Matrix sums(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto s = sums.row(r.assignment[i]);
      auto xi = x.row(i);
      for (std::size_t j = 0; j < d; ++j) s[j] += xi[j];
      ++counts[r.assignment[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double dd = squared_distance(x.row(i), r.centroids.row(r.assignment[i]));
          if (dd > far_d) {
            far_d = dd;
            far = i;
          }
        }
        std::copy(x.row(far).begin(), x.row(far).end(), r.centroids.row(c).begin());
        r.assignment[far] = c;
        continue;
      }
      auto cen = r.centroids.row(c);
      auto s = sums.row(c);
      for (std::size_t j = 0; j < d; ++j) cen[j] = s[j] / static_cast<double>(counts[c]);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    r.inertia += squared_distance(x.row(i), r.centroids.row(r.assignment[i]));
  return r;
}

}  // namespace gse
