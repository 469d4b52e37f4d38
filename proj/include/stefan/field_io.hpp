#pragma once

// CSV persistence for fields:
//   # grid dim=<d> counts=<n0,n1,..> spacing=<h0,h1,..> time=<t>
// followed by one value per line in row-major order, 17 significant digits.
// The header does not carry the origin; readers place it at 0 unless told otherwise.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stefan/format.hpp"
#include "stefan/grid.hpp"

namespace stefan {

inline std::string grid_header(const Grid& g, double time) {
  std::string counts, spacing;
  for (int a = 0; a < g.dim(); ++a) {
    if (a > 0) {
      counts += ',';
      spacing += ',';
    }
    counts += std::to_string(g.count(a));
    spacing += format_real(g.spacing(a));
  }
  return "# grid dim=" + std::to_string(g.dim()) + " counts=" + counts + " spacing=" + spacing +
         " time=" + format_real(time);
}

inline std::string field_to_csv(const TemperatureField& f) {
  std::string out = grid_header(f.grid(), f.time());
  out += '\n';
  for (double v : f.values()) {
    out += format_real(v);
    out += '\n';
  }
  return out;
}

inline void write_field_csv(const std::filesystem::path& path, const TemperatureField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << field_to_csv(f);
  if (!os) throw IoError("write failed: " + path.string());
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  return parts;
}

inline double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("cannot parse " + what + " from '" + s + "'");
  }
}

}  // namespace detail

inline TemperatureField field_from_csv(const std::string& text, const Point& origin = {}) {
  std::istringstream is(text);
  std::string header;
  if (!std::getline(is, header) || header.rfind("# grid ", 0) != 0) {
    throw InvalidInput("field CSV must start with '# grid' header");
  }
  int dim = 0;
  std::vector<std::string> counts_s, spacing_s;
  double time = 0.0;
  bool have_time = false;
  Point org = origin;
  for (const auto& token : detail::split(header.substr(7), ' ')) {
    if (token.empty()) continue;
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw InvalidInput("malformed header token '" + token + "'");
    const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
    if (key == "dim") {
      dim = static_cast<int>(detail::parse_real(value, "dim"));
    } else if (key == "counts") {
      counts_s = detail::split(value, ',');
    } else if (key == "spacing") {
      spacing_s = detail::split(value, ',');
    } else if (key == "time") {
      time = detail::parse_real(value, "time");
      have_time = true;
    } else if (key == "origin") {
      const auto parts = detail::split(value, ',');
      for (std::size_t a = 0; a < parts.size() && a < kMaxDim; ++a) {
        org[a] = detail::parse_real(parts[a], "origin");
      }
    } else {
      throw InvalidInput("unknown header key '" + key + "'");
    }
  }
  if (dim < 1 || dim > kMaxDim || counts_s.size() != static_cast<std::size_t>(dim) ||
      spacing_s.size() != static_cast<std::size_t>(dim) || !have_time) {
    throw InvalidInput("field CSV header is incomplete: '" + header + "'");
  }
  Point extent{1, 1, 1};
  Index counts{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    counts[a] = static_cast<std::size_t>(detail::parse_real(counts_s[a], "count"));
    extent[a] = detail::parse_real(spacing_s[a], "spacing") * static_cast<double>(counts[a]);
  }
  Grid grid(dim, org, extent, counts);
  std::vector<double> values;
  values.reserve(grid.size());
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    values.push_back(detail::parse_real(line, "field value"));
  }
  return TemperatureField(grid, time, std::move(values));
}

inline TemperatureField read_field_csv(const std::filesystem::path& path, const Point& origin = {}) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return field_from_csv(ss.str(), origin);
}

}  // namespace stefan
