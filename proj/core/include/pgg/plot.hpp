#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pgg/eval.hpp"

namespace pgg {

struct AxisRange {
  double lo = 0.0;
  double hi = 1.0;
};

// [min, max] widened by 5% of the span on both sides; a zero span is widened
// by 5% of the magnitude (at least 0.05).
AxisRange padded_range(double min, double max);

// Return-vs-step line chart, one series per gamma (blue to green with
// increasing gamma), seed-pooled means with a shaded 95% CI band. The root
// <svg> carries data-x-lo/hi and data-y-lo/hi attributes with the axis ranges.
std::string render_svg(const std::vector<EvalCell>& cells, const std::string& title);

// Rows per gamma, one column per checkpoint step, cells "mean ± ci95".
std::string render_table_csv(const std::vector<EvalCell>& cells);

// "#rrggbb" for series `index` of `count`.
std::string gamma_color(std::size_t index, std::size_t count);

// Reads report CSVs and writes <env>.svg and <env>_table.csv per environment
// into out_dir. Throws on an empty report set.
std::vector<std::filesystem::path> plot_reports(const std::vector<std::filesystem::path>& reports,
                                                const std::filesystem::path& out_dir);

}  // namespace pgg
