#include <doctest.h>

#include <stack>
#include <string>
#include <vector>

#include "fsl/errors.hpp"
#include "fsl/svg.hpp"

using namespace fsl;

namespace {

// Minimal well-formedness check: every tag balances and attributes quote.
bool well_formed_xml(const std::string& text) {
  std::stack<std::string> open;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?') continue;  // declaration
    bool closing = tag[0] == '/';
    bool self_closing = tag.back() == '/';
    std::string name = tag.substr(closing ? 1 : 0);
    std::size_t name_end = name.find_first_of(" \t/");
    if (name_end != std::string::npos) name = name.substr(0, name_end);
    if (closing) {
      if (open.empty() || open.top() != name) return false;
      open.pop();
    } else if (!self_closing) {
      open.push(name);
    }
  }
  return open.empty();
}

std::vector<svg::Series> sample_series() {
  std::vector<svg::Series> series(2);
  series[0].label = "model";
  series[0].color = "#1f77b4";
  series[1].label = "expert";
  series[1].color = "#ff7f0e";
  for (int i = 0; i < 20; ++i) {
    double x = 0.5 + i * 0.1;
    series[0].x.push_back(x);
    series[0].y.push_back(x * x);
    series[1].x.push_back(x);
    series[1].y.push_back(x * x * 1.02);
  }
  return series;
}

}  // namespace

TEST_CASE("line_chart emits well-formed XML with labels and both series") {
  auto series = sample_series();
  std::string chart = svg::line_chart("pd: e_l", "e_l", "yield (A.U.)", series);
  CHECK(well_formed_xml(chart));
  CHECK(chart.find("<svg") != std::string::npos);
  CHECK(chart.find("pd: e_l") != std::string::npos);
  CHECK(chart.find("yield (A.U.)") != std::string::npos);
  CHECK(chart.find("#1f77b4") != std::string::npos);
  CHECK(chart.find("#ff7f0e") != std::string::npos);
  CHECK(chart.find("model") != std::string::npos);
  CHECK(chart.find("expert") != std::string::npos);
}

TEST_CASE("line_chart output is byte-deterministic") {
  auto series = sample_series();
  CHECK(svg::line_chart("t", "x", "y", series) == svg::line_chart("t", "x", "y", series));
}

TEST_CASE("line_chart escapes markup in labels") {
  auto series = sample_series();
  std::string chart = svg::line_chart("a < b & c", "x", "y", series);
  CHECK(well_formed_xml(chart));
  CHECK(chart.find("a &lt; b &amp; c") != std::string::npos);
}

TEST_CASE("line_chart rejects empty or broken input") {
  std::vector<svg::Series> empty;
  CHECK_THROWS_AS(svg::line_chart("t", "x", "y", empty), ArgumentError);
  std::vector<svg::Series> bad(1);
  bad[0].x = {1.0, 2.0};
  bad[0].y = {1.0};
  CHECK_THROWS_AS(svg::line_chart("t", "x", "y", bad), ArgumentError);
}
