/*
 Copyright 2026 The CuRPO Lab Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "curpo/geom.hpp"

namespace curpo::analysis {

/// A correlation coefficient is undefined for the given input (zero variance
/// or all pairs tied).
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline void check_pair(std::span<const double> x, std::span<const double> y,
                       const char* who) {
  if (x.size() != y.size())
    throw std::invalid_argument(std::string(who) + ": length mismatch");
  if (x.size() < 2) throw std::invalid_argument(std::string(who) + ": need at least 2 points");
}

}  // namespace detail

inline double pearson(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y, "pearson");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0)
    throw UndefinedCorrelation("pearson: zero variance in input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values share the average of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y, "spearman");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  try {
    return pearson(rx, ry);
  } catch (const UndefinedCorrelation&) {
    throw UndefinedCorrelation("spearman: all values tied in an input");
  }
}

/// Pair counts behind Kendall's tau-b.
struct KendallCounts {
  std::int64_t pairs = 0;       // n (n - 1) / 2
  std::int64_t ties_x = 0;      // pairs tied in x (including joint ties)
  std::int64_t ties_y = 0;      // pairs tied in y (including joint ties)
  std::int64_t ties_xy = 0;     // pairs tied in both
  std::int64_t discordant = 0;

  std::int64_t concordant() const noexcept {
    return pairs - ties_x - ties_y + ties_xy - discordant;
  }
};

/// O(n log n) pair counting (Knight's algorithm): sort by (x, y), count
/// x ties, then count y inversions with a merge sort.
inline KendallCounts kendall_counts(std::span<const double> x, std::span<const double> y) {
  detail::check_pair(x, y, "kendall_tau");
  const std::size_t n = x.size();
  KendallCounts k;
  k.pairs = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  auto tied_pairs = [](std::int64_t run) { return run * (run - 1) / 2; };
  std::int64_t run_x = 1, run_xy = 1;
  for (std::size_t i = 1; i < n; ++i) {
    const bool same_x = x[order[i]] == x[order[i - 1]];
    const bool same_xy = same_x && y[order[i]] == y[order[i - 1]];
    if (same_x) {
      ++run_x;
    } else {
      k.ties_x += tied_pairs(run_x);
      run_x = 1;
    }
    if (same_xy) {
      ++run_xy;
    } else {
      k.ties_xy += tied_pairs(run_xy);
      run_xy = 1;
    }
  }
  k.ties_x += tied_pairs(run_x);
  k.ties_xy += tied_pairs(run_xy);

  // Inversions of y in (x, y) order are exactly the discordant pairs.
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  std::int64_t swaps = 0;
  for (std::size_t width = 1; width < n; width *= 2) {
    for (std::size_t lo = 0; lo < n; lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, n);
      const std::size_t hi = std::min(lo + 2 * width, n);
      std::size_t i = lo, j = mid, out = lo;
      while (i < mid && j < hi) {
        if (ys[j] < ys[i]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[out++] = ys[j++];
        } else {
          buf[out++] = ys[i++];
        }
      }
      while (i < mid) buf[out++] = ys[i++];
      while (j < hi) buf[out++] = ys[j++];
    }
    std::swap(ys, buf);
  }
  k.discordant = swaps;

  std::int64_t run_y = 1;
  for (std::size_t i = 1; i < n; ++i) {
    if (ys[i] == ys[i - 1]) {
      ++run_y;
    } else {
      k.ties_y += tied_pairs(run_y);
      run_y = 1;
    }
  }
  k.ties_y += tied_pairs(run_y);
  return k;
}

/// Tau-b from pair counts: (C - D) / sqrt((n0 - Tx)(n0 - Ty)).
inline double tau_b(std::int64_t concordant, std::int64_t discordant, std::int64_t pairs,
                    std::int64_t ties_x, std::int64_t ties_y) {
  const std::int64_t dx = pairs - ties_x;
  const std::int64_t dy = pairs - ties_y;
  if (dx == 0 || dy == 0) throw UndefinedCorrelation("kendall_tau: all pairs tied in an input");
  return static_cast<double>(concordant - discordant) /
         std::sqrt(static_cast<double>(dx) * static_cast<double>(dy));
}

inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  const KendallCounts k = kendall_counts(x, y);
  return tau_b(k.concordant(), k.discordant, k.pairs, k.ties_x, k.ties_y);
}

struct EvalRecord {
  std::int64_t sample_id = 0;
  int category = 0;
  std::optional<BBox> predicted;
  BBox gt;
  double iou = 0.0;
  bool well_formed = false;
};

inline EvalRecord make_record(std::int64_t id, int category, std::optional<BBox> predicted,
                              const BBox& gt, bool well_formed) {
  EvalRecord r{id, category, predicted, gt, 0.0, well_formed};
  if (predicted) r.iou = curpo::iou(*predicted, gt);
  return r;
}

inline double miou(std::span<const EvalRecord> records) {
  if (records.empty()) throw std::invalid_argument("miou: no records");
  double s = 0.0;
  for (const auto& r : records) s += r.predicted ? r.iou : 0.0;
  return s / static_cast<double>(records.size());
}

/// IoU thresholds 0.50, 0.55, ..., 0.95 (computed as k/20 so each is the
/// correctly rounded decimal).
inline std::vector<double> default_thresholds() {
  std::vector<double> t;
  for (int k = 10; k <= 19; ++k) t.push_back(static_cast<double>(k) / 20.0);
  return t;
}

struct CategoryAp {
  int category = 0;
  std::size_t count = 0;
  std::vector<double> ap;  // one per threshold
  double mean_ap = 0.0;
};

struct MapReport {
  std::vector<double> thresholds;
  std::vector<CategoryAp> per_category;  // ascending category id
  double map = 0.0;
};

/// Grounding mAP: one prediction per query, so AP at threshold t is the
/// fraction of a category's queries whose IoU clears t. mAP averages over
/// thresholds, then over categories.
inline MapReport mean_average_precision(std::span<const EvalRecord> records,
                                        std::vector<double> thresholds = default_thresholds()) {
  if (records.empty()) throw std::invalid_argument("map: no records");
  if (thresholds.empty()) throw std::invalid_argument("map: no thresholds");
  std::map<int, std::vector<double>> by_cat;
  for (const auto& r : records) by_cat[r.category].push_back(r.predicted ? r.iou : 0.0);

  MapReport rep;
  rep.thresholds = thresholds;
  for (const auto& [cat, ious] : by_cat) {
    CategoryAp c;
    c.category = cat;
    c.count = ious.size();
    for (double t : thresholds) {
      const auto hits = std::count_if(ious.begin(), ious.end(), [t](double v) { return v >= t; });
      c.ap.push_back(static_cast<double>(hits) / static_cast<double>(ious.size()));
    }
    c.mean_ap = std::accumulate(c.ap.begin(), c.ap.end(), 0.0) / static_cast<double>(c.ap.size());
    rep.map += c.mean_ap;
    rep.per_category.push_back(std::move(c));
  }
  rep.map /= static_cast<double>(rep.per_category.size());
  return rep;
}

/// As above, but every category in `categories` must have at least one record.
inline MapReport mean_average_precision(std::span<const EvalRecord> records,
                                        std::span<const int> categories,
                                        std::vector<double> thresholds = default_thresholds()) {
  for (int c : categories)
    if (std::none_of(records.begin(), records.end(),
                     [c](const EvalRecord& r) { return r.category == c; }))
      throw std::invalid_argument("map: category " + std::to_string(c) + " has no records");
  return mean_average_precision(records, std::move(thresholds));
}

}  // namespace curpo::analysis
