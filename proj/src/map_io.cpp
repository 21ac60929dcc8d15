#include "vnav/grid_env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace vnav {

namespace {

double parse_number(const std::string& text, int line, const std::string& key) {
  std::istringstream in(text);
  double value = 0.0;
  std::string rest;
  if (!(in >> value) || (in >> rest)) throw MapParseError(line, "bad value for '" + key + "'");
  return value;
}

}  // namespace

GridMap parse_map(std::istream& in) {
  static const std::array<std::string, 5> kKeys = {"ncols", "nrows", "xll", "yll", "cellsize"};
  std::map<std::string, double> header;
  std::string line;
  int line_no = 0;

  while (header.size() < kKeys.size()) {
    if (!std::getline(in, line)) throw MapParseError(line_no + 1, "truncated header");
    ++line_no;
    std::istringstream fields(line);
    std::string key, value;
    if (!(fields >> key)) throw MapParseError(line_no, "empty header line");
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
      throw MapParseError(line_no, "unknown header key '" + key + "'");
    if (header.count(key)) throw MapParseError(line_no, "duplicate header key '" + key + "'");
    std::getline(fields, value);
    header[key] = parse_number(value, line_no, key);
  }

  const double ncols_d = header["ncols"], nrows_d = header["nrows"];
  if (ncols_d < 1 || nrows_d < 1 || ncols_d != std::floor(ncols_d) || nrows_d != std::floor(nrows_d))
    throw MapParseError(line_no, "ncols and nrows must be positive integers");
  if (!(header["cellsize"] > 0.0)) throw MapParseError(line_no, "cellsize must be positive");
  const int ncols = static_cast<int>(ncols_d), nrows = static_cast<int>(nrows_d);

  GridMap::Cells cells(nrows, ncols);
  for (int r = 0; r < nrows; ++r) {
    if (!std::getline(in, line))
      throw MapParseError(line_no + 1, "expected " + std::to_string(nrows) + " rows, got " +
                                           std::to_string(r));
    ++line_no;
    if (static_cast<int>(line.size()) != ncols)
      throw MapParseError(line_no, "row " + std::to_string(r) + " has " +
                                       std::to_string(line.size()) + " cells, expected " +
                                       std::to_string(ncols));
    for (int c = 0; c < ncols; ++c) {
      const char ch = line[static_cast<std::size_t>(c)];
      if (ch != '0' && ch != '1')
        throw MapParseError(line_no, "invalid cell symbol '" + std::string(1, ch) + "' at row " +
                                         std::to_string(r) + ", col " + std::to_string(c));
      cells(r, c) = static_cast<std::uint8_t>(ch - '0');
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty()) throw MapParseError(line_no, "unexpected content after the last row");
  }

  return GridMap(GeoTransform::from_corner(header["xll"], header["yll"], ncols, nrows,
                                           header["cellsize"]),
                 std::move(cells));
}

GridMap load_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open map file " + path.string());
  return parse_map(in);
}

void write_map(std::ostream& out, const GridMap& map) {
  const auto& t = map.transform();
  std::ostringstream header;
  header.precision(17);
  header << "ncols " << map.ncols() << '\n'
         << "nrows " << map.nrows() << '\n'
         << "xll " << t.x_min << '\n'
         << "yll " << t.y_min << '\n'
         << "cellsize " << t.cell_size << '\n';
  out << header.str();
  std::string row(static_cast<std::size_t>(map.ncols()), '0');
  for (int r = 0; r < map.nrows(); ++r) {
    for (int c = 0; c < map.ncols(); ++c) row[static_cast<std::size_t>(c)] = map.is_water(r, c) ? '0' : '1';
    out << row << '\n';
  }
}

void save_map(const std::filesystem::path& path, const GridMap& map) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write map file " + path.string());
  write_map(out, map);
}

// ---------------------------------------------------------------------------

namespace {

using NoiseField = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

NoiseField value_noise(Rng& rng, int rows, int cols, int spacing) {
  const int lr = rows / spacing + 2, lc = cols / spacing + 2;
  NoiseField lattice(lr, lc);
  for (Eigen::Index i = 0; i < lattice.size(); ++i) lattice.data()[i] = rng.uniform();

  const auto fade = [](double t) { return t * t * (3.0 - 2.0 * t); };
  NoiseField out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    const int r0 = r / spacing;
    const double tr = fade(static_cast<double>(r % spacing) / spacing);
    for (int c = 0; c < cols; ++c) {
      const int c0 = c / spacing;
      const double tc = fade(static_cast<double>(c % spacing) / spacing);
      const double top = lattice(r0, c0) * (1 - tc) + lattice(r0, c0 + 1) * tc;
      const double bottom = lattice(r0 + 1, c0) * (1 - tc) + lattice(r0 + 1, c0 + 1) * tc;
      out(r, c) = top * (1 - tr) + bottom * tr;
    }
  }
  return out;
}

// Floods every water component except the largest (first found on ties) to land.
void keep_largest_water_component(GridMap::Cells& cells) {
  const int rows = static_cast<int>(cells.rows()), cols = static_cast<int>(cells.cols());
  Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> label =
      Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>::Constant(rows, cols, -1);
  std::vector<std::size_t> sizes;
  std::deque<CellIndex> queue;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (cells(r, c) != 0 || label(r, c) >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      sizes.push_back(0);
      label(r, c) = id;
      queue.push_back({r, c});
      while (!queue.empty()) {
        const CellIndex cur = queue.front();
        queue.pop_front();
        ++sizes.back();
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = cur.row + dr, nc = cur.col + dc;
            if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
            if (cells(nr, nc) != 0 || label(nr, nc) >= 0) continue;
            label(nr, nc) = id;
            queue.push_back({nr, nc});
          }
      }
    }
  }
  if (sizes.empty()) return;
  const int keep = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  cells = (label == keep).select(GridMap::Cells::Zero(rows, cols),
                                 GridMap::Cells::Ones(rows, cols));
}

}  // namespace

GridMap generate_map(std::uint64_t seed, const MapGenParams& params) {
  if (!(params.water_fraction > 0.0 && params.water_fraction <= 1.0))
    throw std::invalid_argument("water_fraction must lie in (0, 1]");
  if (params.ncols < 1 || params.nrows < 1) throw std::invalid_argument("map must be non-empty");
  const auto transform = GeoTransform::from_corner(params.x_min, params.y_min, params.ncols,
                                                   params.nrows, params.cell_size);

  GridMap::Cells cells = GridMap::Cells::Zero(params.nrows, params.ncols);
  if (params.water_fraction < 1.0) {
    Rng rng(seed);
    NoiseField noise = NoiseField::Zero(params.nrows, params.ncols);
    double amplitude = 1.0;
    int spacing = std::max(1, params.feature_cells);
    for (int o = 0; o < std::max(1, params.octaves); ++o) {
      noise += amplitude * value_noise(rng, params.nrows, params.ncols, spacing);
      amplitude *= 0.5;
      spacing = std::max(1, spacing / 2);
    }
    std::vector<double> sorted(noise.data(), noise.data() + noise.size());
    const auto water_cells = static_cast<std::size_t>(
        std::llround(params.water_fraction * static_cast<double>(sorted.size())));
    std::sort(sorted.begin(), sorted.end());
    const double threshold =
        water_cells == 0 ? -1.0 : sorted[std::min(water_cells, sorted.size()) - 1];
    cells = (noise <= threshold).select(GridMap::Cells::Zero(params.nrows, params.ncols),
                                        GridMap::Cells::Ones(params.nrows, params.ncols));
    keep_largest_water_component(cells);
  }
  return GridMap(transform, std::move(cells));
}

}  // namespace vnav
