#pragma once
// File formats: the S2SGRID1 dense-grid container (magic bytes, u32 JSON
// header length, JSON {"height","width","dtype":"f32"}, row-major LE f32
// payload), CSV matrices, spot-table CSV with its JSON sidecar, and mask
// JSON. Little-endian hosts assumed (checked at compile time where possible).

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "s2s/errors.hpp"
#include "s2s/sampling.hpp"
#include "s2s/st_data.hpp"
#include "s2s/tensor.hpp"

namespace s2s {

using json = nlohmann::json;

inline constexpr char kGridMagic[8] = {'S', '2', 'S', 'G', 'R', 'I', 'D', '1'};

inline void write_grid(const std::string& path, const Tensor<float>& grid) {
  if (grid.rank() != 2) throw ShapeError("write_grid expects a 2D array");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot create " + path);
  f.write(kGridMagic, 8);
  json header = {{"height", grid.dim(0)},
                 {"width", grid.dim(1)},
                 {"dtype", "f32"}};
  const std::string hs = header.dump();
  const std::uint32_t len = static_cast<std::uint32_t>(hs.size());
  f.write(reinterpret_cast<const char*>(&len), 4);
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  f.write(reinterpret_cast<const char*>(grid.data.data()),
          static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
  if (!f) throw IoError("write failed: " + path);
}

inline Tensor<float> read_grid_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kGridMagic, 8) != 0)
    throw IoError("bad magic in " + path);
  std::uint32_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 4);
  if (!f || len == 0 || len > (1u << 20))
    throw IoError("bad header length in " + path);
  std::string hs(len, '\0');
  f.read(hs.data(), len);
  json header = json::parse(hs, nullptr, false);
  if (header.is_discarded()) throw IoError("bad header JSON in " + path);
  if (header.value("dtype", "") != std::string("f32"))
    throw IoError("unsupported dtype in " + path);
  const int h = header.at("height").get<int>();
  const int w = header.at("width").get<int>();
  if (h <= 0 || w <= 0) throw IoError("bad dimensions in " + path);
  Tensor<float> grid({h, w});
  f.read(reinterpret_cast<char*>(grid.data.data()),
         static_cast<std::streamsize>(grid.data.size() * sizeof(float)));
  if (!f) throw IoError("truncated payload in " + path);
  return grid;
}

inline Tensor<float> read_grid_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::vector<float>> rows;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<float> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw IoError("bad CSV cell '" + cell + "' in " + path);
      }
    }
    if (!rows.empty() && row.size() != rows[0].size())
      throw IoError("ragged CSV matrix in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyInput("empty CSV matrix: " + path);
  Tensor<float> grid({static_cast<int>(rows.size()),
                      static_cast<int>(rows[0].size())});
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[0].size(); ++c)
      grid(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  return grid;
}

// Container or CSV, detected by magic bytes.
inline Tensor<float> read_grid(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  char magic[8] = {};
  f.read(magic, 8);
  f.close();
  if (std::memcmp(magic, kGridMagic, 8) == 0) return read_grid_container(path);
  return read_grid_csv(path);
}

// ---- spot table CSV (header x,y,gene,count) + JSON sidecar ----

inline SpotTable read_spot_table(const std::string& csv_path,
                                 const std::string& sidecar_path) {
  SpotTable t;
  {
    std::ifstream f(sidecar_path);
    if (!f) throw IoError("cannot open sidecar " + sidecar_path);
    json meta = json::parse(f, nullptr, false);
    if (meta.is_discarded())
      throw IoError("bad sidecar JSON: " + sidecar_path);
    t.grid_height = meta.at("grid_height").get<int>();
    t.grid_width = meta.at("grid_width").get<int>();
    t.genes = meta.at("genes").get<std::vector<std::string>>();
    if (meta.contains("pitch_um") && !meta["pitch_um"].is_null())
      t.pitch_um = meta["pitch_um"].get<double>();
  }
  std::ifstream f(csv_path);
  if (!f) throw IoError("cannot open " + csv_path);
  std::string line;
  if (!std::getline(f, line) || line.rfind("x,y,gene,count", 0) != 0)
    throw IoError("spot CSV must start with header x,y,gene,count");
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string xs, ys, gene, cs;
    if (!std::getline(ss, xs, ',') || !std::getline(ss, ys, ',') ||
        !std::getline(ss, gene, ',') || !std::getline(ss, cs, ','))
      throw IoError("bad spot row: " + line);
    Spot s;
    try {
      s.x = std::stod(xs);
      s.y = std::stod(ys);
      s.count = std::stod(cs);
    } catch (const std::exception&) {
      throw IoError("bad numeric field in spot row: " + line);
    }
    s.gene = gene;
    t.spots.push_back(std::move(s));
  }
  return t;
}

inline void write_spot_table(const std::string& csv_path,
                             const std::string& sidecar_path,
                             const SpotTable& t) {
  {
    std::ofstream f(csv_path);
    if (!f) throw IoError("cannot create " + csv_path);
    f << "x,y,gene,count\n";
    for (const auto& s : t.spots)
      f << s.x << ',' << s.y << ',' << s.gene << ',' << s.count << '\n';
  }
  json meta = {{"grid_height", t.grid_height},
               {"grid_width", t.grid_width},
               {"genes", t.genes},
               {"pitch_um", t.pitch_um.has_value() ? json(*t.pitch_um)
                                                   : json(nullptr)}};
  std::ofstream f(sidecar_path);
  if (!f) throw IoError("cannot create " + sidecar_path);
  f << meta.dump(2) << '\n';
}

// ---- masks and tissue ----

inline json mask_to_json(const SamplingMask& m) {
  return json{{"height", m.height},
              {"width", m.width},
              {"stride", m.stride},
              {"offset", {m.off_row, m.off_col}}};
}

inline SamplingMask mask_from_json(const json& j) {
  return make_mask(j.at("height").get<int>(), j.at("width").get<int>(),
                   j.at("stride").get<int>(), j.at("offset")[0].get<int>(),
                   j.at("offset")[1].get<int>());
}

inline void write_tissue(const std::string& path,
                         const Tensor<std::uint8_t>& tissue) {
  Tensor<float> f({tissue.dim(0), tissue.dim(1)});
  for (std::int64_t i = 0; i < tissue.numel(); ++i)
    f.data[i] = tissue.data[i] != 0 ? 1.0f : 0.0f;
  write_grid(path, f);
}

inline Tensor<std::uint8_t> read_tissue(const std::string& path) {
  Tensor<float> f = read_grid(path);
  Tensor<std::uint8_t> t({f.dim(0), f.dim(1)});
  for (std::int64_t i = 0; i < f.numel(); ++i)
    t.data[i] = f.data[i] > 0.5f ? 1 : 0;
  return t;
}

inline void write_text(const std::string& path, const std::string& body) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot create " + path);
  f << body;
  if (!f) throw IoError("write failed: " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// FNV-1a 64-bit, used as the resolved-config fingerprint.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace s2s
