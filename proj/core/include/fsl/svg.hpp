#pragma once

#include <span>
#include <string>
#include <vector>

namespace fsl::svg {

struct Series {
  std::string label;
  std::string color;  // e.g. "#1f77b4"
  std::vector<double> x;
  std::vector<double> y;
};

/// Deterministic standalone SVG line chart (fixed canvas, no timestamps).
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, std::span<const Series> series);

}  // namespace fsl::svg
