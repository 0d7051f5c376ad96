#pragma once
// Canonical data model for the ST branch: spot tables, per-gene grids, and
// the grayscale image corpus used for co-training.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

struct Spot {
  double x = 0.0;  // grid column (or raw coordinate when pitch is set)
  double y = 0.0;  // grid row
  std::string gene;
  double count = 0.0;
};

struct SpotTable {
  std::vector<Spot> spots;
  int grid_height = 0;
  int grid_width = 0;
  std::vector<std::string> genes;
  std::optional<double> pitch_um;

  bool has_gene(const std::string& g) const {
    for (const auto& e : genes)
      if (e == g) return true;
    return false;
  }
};

// Dense 2D field of (log-normalized) expression for one gene plus the tissue
// mask. Values are zero wherever tissue is zero.
struct GeneGrid {
  Tensor<float> values;
  Tensor<std::uint8_t> tissue;
  std::string gene;

  int height() const { return values.dim(0); }
  int width() const { return values.dim(1); }
};

struct ImageCorpus {
  std::vector<Tensor<float>> images;  // grayscale, values in [0,1]
  std::vector<std::string> sources;
  int skipped_small = 0;
  int skipped_undecodable = 0;
};

// Accumulate raw counts for one gene onto the grid. Tissue marks every cell
// containing at least one spot of any gene. With a pitch, raw coordinates
// are binned by floor(coord / pitch).
inline GeneGrid rasterize(const SpotTable& table, const std::string& gene,
                          std::optional<double> pitch = std::nullopt) {
  if (table.spots.empty()) throw EmptyInput("rasterize: empty spot table");
  if (!table.has_gene(gene))
    throw GeneNotFound("rasterize: gene '" + gene + "' not in table");
  if (table.grid_height <= 0 || table.grid_width <= 0)
    throw ShapeError("rasterize: invalid grid dimensions");
  if (!pitch.has_value()) pitch = table.pitch_um;

  GeneGrid g;
  g.gene = gene;
  g.values = Tensor<float>({table.grid_height, table.grid_width});
  g.tissue = Tensor<std::uint8_t>({table.grid_height, table.grid_width});

  auto bin = [&](double v) -> int {
    if (pitch.has_value()) {
      if (*pitch <= 0.0) throw ConfigError("rasterize: pitch must be positive");
      return static_cast<int>(std::floor(v / *pitch));
    }
    const double r = std::floor(v);
    if (r != v)
      throw InvalidCount("rasterize: non-integer coordinate without a pitch");
    return static_cast<int>(r);
  };

  for (const auto& s : table.spots) {
    if (s.count < 0.0) throw InvalidCount("rasterize: negative count");
    const int col = bin(s.x), row = bin(s.y);
    if (row < 0 || row >= table.grid_height || col < 0 ||
        col >= table.grid_width)
      throw ShapeError("rasterize: spot outside the grid after binning");
    g.tissue(row, col) = 1;
    if (s.gene == gene) g.values(row, col) += static_cast<float>(s.count);
  }
  return g;
}

// values <- ln(1 + count), elementwise; tissue unchanged.
inline GeneGrid log_normalize(const GeneGrid& grid) {
  GeneGrid out = grid;
  for (auto& v : out.values.data) {
    if (v < 0.0f) throw InvalidCount("log_normalize: negative count");
    v = std::log1p(v);
  }
  return out;
}

}  // namespace s2s
