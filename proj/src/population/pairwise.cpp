#include "iad/population/pairwise.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "iad/common/error.hpp"
#include "iad/common/io.hpp"
#include "iad/core/episode.hpp"

namespace iad::population {

nlohmann::json ReturnMatrix::to_json() const {
  return {{"kind", "return_matrix"},
          {"layout", layout},
          {"horizon", horizon},
          {"episodes", episodes},
          {"ids", ids},
          {"mean", mean},
          {"standard_error", standard_error}};
}

ReturnMatrix pairwise_matrix(const PartnerPopulation& population, const env::LayoutSpec& layout,
                             int episodes, std::uint64_t seed) {
  if (episodes < 1) throw ConfigError("episodes must be >= 1");
  const core::PartnerPool pool = load_partner_pool(population, layout);
  const std::size_t n = pool.partners.size();
  ReturnMatrix m;
  m.layout = layout.name;
  m.horizon = layout.horizon;
  m.episodes = episodes;
  m.mean.assign(n, std::vector<double>(n, 0.0));
  m.standard_error.assign(n, std::vector<double>(n, 0.0));
  std::vector<core::ActorFactory> actors;
  for (const core::Partner& p : pool.partners) {
    m.ids.push_back(p.id);
    actors.push_back(core::policy_factory(p.policy));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const core::ReturnStats s = core::evaluate_pair(
          layout, actors[i], actors[j], episodes, derive_seed(seed, static_cast<std::uint64_t>(i * n + j)));
      m.mean[i][j] = s.mean;
      m.standard_error[i][j] = s.standard_error;
    }
  }
  return m;
}

std::string matrix_to_csv(const ReturnMatrix& matrix) {
  std::ostringstream out;
  out << "partner";
  for (const std::string& id : matrix.ids) out << "," << id;
  out << "\n";
  char buf[32];
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out << matrix.ids[i];
    for (double v : matrix.mean[i]) {
      std::snprintf(buf, sizeof(buf), ",%.6f", v);
      out << buf;
    }
    out << "\n";
  }
  return out.str();
}

std::string matrix_to_svg(const ReturnMatrix& matrix) {
  const int cell = 36, label = 150;
  const int n = static_cast<int>(matrix.size());
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& row : matrix.mean) {
    for (double v : row) {
      lo = first ? v : std::min(lo, v);
      hi = first ? v : std::max(hi, v);
      first = false;
    }
  }
  const int size = label + n * cell;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" font-family=\"monospace\" font-size=\"10\">\n";
  for (int i = 0; i < n; ++i) {
    svg << "<text x=\"4\" y=\"" << label + i * cell + cell / 2 + 3 << "\">" << matrix.ids[i]
        << "</text>\n";
    svg << "<text transform=\"translate(" << label + i * cell + cell / 2 + 3 << "," << label - 4
        << ") rotate(-90)\">" << matrix.ids[i] << "</text>\n";
    for (int j = 0; j < n; ++j) {
      const double v = matrix.mean[i][j];
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.5;
      // white (low) to dark blue (high)
      const int r = static_cast<int>(255 - 225 * t), g = static_cast<int>(255 - 175 * t), b = 255 - static_cast<int>(75 * t);
      char value[32];
      std::snprintf(value, sizeof(value), "%.1f", v);
      svg << "<rect x=\"" << label + j * cell << "\" y=\"" << label + i * cell << "\" width=\""
          << cell << "\" height=\"" << cell << "\" fill=\"rgb(" << r << "," << g << "," << b
          << ")\"/>\n";
      svg << "<text x=\"" << label + j * cell + 4 << "\" y=\"" << label + i * cell + cell / 2 + 3
          << "\" fill=\"" << (t > 0.6 ? "white" : "black") << "\">" << value << "</text>\n";
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_matrix(const ReturnMatrix& matrix, const std::filesystem::path& stem) {
  const std::string base = stem.string();
  write_file_atomic(base + ".csv", matrix_to_csv(matrix));
  write_file_atomic(base + ".json", matrix.to_json().dump(2) + "\n");
  write_file_atomic(base + ".svg", matrix_to_svg(matrix));
}

}  // namespace iad::population
