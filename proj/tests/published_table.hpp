#pragma once

// Published per-task DSC / IoU pairs (fine-tuned vs. baseline) with the printed improvements.

#include <vector>

#include "aquaseg/metrics.hpp"

inline std::vector<aquaseg::PublishedRow> published_rows() {
  return {
      {"BW", 87.83, 83.04, 5.80, 82.34, 76.50, 7.61},   {"HD", 86.32, 78.35, 10.14, 77.82, 69.63, 11.76},
      {"WR", 87.01, 70.07, 24.37, 78.85, 59.50, 32.57}, {"SR", 77.88, 74.04, 5.16, 68.08, 64.52, 5.53},
      {"RO", 90.02, 85.63, 5.39, 84.08, 78.85, 6.65},   {"RI", 82.61, 77.13, 7.05, 75.82, 68.08, 11.31},
      {"FV", 77.88, 52.41, 32.19, 68.15, 45.58, 49.79}, {"PF", 54.87, 63.06, -12.95, 42.92, 51.43, -16.48},
  };
}
