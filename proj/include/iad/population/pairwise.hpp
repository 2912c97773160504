#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "iad/env/layout.hpp"
#include "iad/population/population.hpp"

namespace iad::population {

struct ReturnMatrix {
  std::string layout;
  int horizon = 0;
  int episodes = 0;  // per seat assignment
  std::vector<std::string> ids;
  // mean[i][j]: partner i with partner j, averaged over `episodes` episodes
  // with i as blue and as many with i as green.
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> standard_error;

  std::size_t size() const { return ids.size(); }
  nlohmann::json to_json() const;
};

// `layout` is used as given, so set its horizon before calling (T = 400 for
// the usual analysis protocol).
ReturnMatrix pairwise_matrix(const PartnerPopulation& population, const env::LayoutSpec& layout,
                             int episodes, std::uint64_t seed);

// Header row of ids, then one row per partner led by its id.
std::string matrix_to_csv(const ReturnMatrix& matrix);

// Writes <stem>.csv, <stem>.json (plot data) and <stem>.svg (heatmap).
void write_matrix(const ReturnMatrix& matrix, const std::filesystem::path& stem);

std::string matrix_to_svg(const ReturnMatrix& matrix);

}  // namespace iad::population
