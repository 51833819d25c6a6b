#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace fosr {

// Type-7 (linear interpolation) quantile of a sorted vector.
inline double quantile_sorted(const std::vector<double>& s, double prob) {
  const int n = static_cast<int>(s.size());
  double h = (n - 1) * prob;
  int lo = static_cast<int>(std::floor(h));
  int hi = std::min(lo + 1, n - 1);
  return s[lo] + (h - lo) * (s[hi] - s[lo]);
}

inline double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, prob);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  double m = mean_of(v), s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace fosr
