#pragma once

// Serialization. Text formats only, all numeric output at 17 significant
// digits so write -> read -> write is byte-identical.
//
//   mesh2d v1:
//     mesh2d v1
//     vertices <N>
//     <x> <y> <boundary_flag>        (N lines)
//     triangles <M>
//     <i> <j> <k> <region_tag>       (M lines)
//
//   field v1:
//     field v1
//     <N>
//     <value>                        (N lines)
//
// plus legacy-ASCII VTK export, CSV tables, tolerance-aware golden-file
// comparison, and the plain-text run manifest.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tdt/common.hpp"
#include "tdt/mesh.hpp"
#include "tdt/pde.hpp"

namespace tdt {

namespace detail {

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& tok, const std::string& context,
                           int line_no) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size())
    throw ConfigError(context + " parse error at line " + std::to_string(line_no) +
                      ": bad number '" + tok + "'");
  return v;
}

inline long parse_int(const std::string& tok, const std::string& context,
                      int line_no) {
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (end != tok.c_str() + tok.size())
    throw ConfigError(context + " parse error at line " + std::to_string(line_no) +
                      ": bad integer '" + tok + "'");
  return v;
}

}  // namespace detail

inline void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot open '" + path + "' for writing");
  out << "mesh2d v1\n";
  out << "vertices " << mesh.num_vertices() << "\n";
  for (int v = 0; v < mesh.num_vertices(); ++v)
    out << format_g17(mesh.vertices[v].x) << " " << format_g17(mesh.vertices[v].y)
        << " " << (mesh.boundary_vertex[v] ? 1 : 0) << "\n";
  out << "triangles " << mesh.num_triangles() << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t)
    out << mesh.triangles[t][0] << " " << mesh.triangles[t][1] << " "
        << mesh.triangles[t][2] << " " << to_string(mesh.region_tag[t]) << "\n";
  if (!out) throw ConfigError("io: write failed for '" + path + "'");
}

inline Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("io: cannot open mesh file '" + path + "'");
  const std::string ctx = "io: mesh file '" + path + "'";
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line))
      throw ConfigError(ctx + " parse error at line " + std::to_string(line_no + 1) +
                        ": unexpected end of file");
    ++line_no;
    return line;
  };
  if (next_line() != "mesh2d v1")
    throw ConfigError(ctx + " parse error at line 1: expected header 'mesh2d v1'");
  auto head = detail::split_tokens(next_line());
  if (head.size() != 2 || head[0] != "vertices")
    throw ConfigError(ctx + " parse error at line 2: expected 'vertices <count>'");
  const long nv = detail::parse_int(head[1], ctx, line_no);
  if (nv < 3) throw ConfigError(ctx + ": vertex count must be at least 3");
  Mesh mesh;
  mesh.vertices.reserve(nv);
  for (long v = 0; v < nv; ++v) {
    const auto tok = detail::split_tokens(next_line());
    if (tok.size() != 3)
      throw ConfigError(ctx + " parse error at line " + std::to_string(line_no) +
                        ": expected 'x y boundary_flag'");
    const double x = detail::parse_double(tok[0], ctx, line_no);
    const double y = detail::parse_double(tok[1], ctx, line_no);
    const long flag = detail::parse_int(tok[2], ctx, line_no);
    if (flag != 0 && flag != 1)
      throw ConfigError(ctx + " parse error at line " + std::to_string(line_no) +
                        ": boundary flag must be 0 or 1");
    mesh.vertices.push_back(Vec2{x, y});
    mesh.boundary_vertex.push_back(static_cast<std::uint8_t>(flag));
  }
  const auto thead = detail::split_tokens(next_line());
  if (thead.size() != 2 || thead[0] != "triangles")
    throw ConfigError(ctx + " parse error at line " + std::to_string(line_no) +
                      ": expected 'triangles <count>'");
  const long nt = detail::parse_int(thead[1], ctx, line_no);
  if (nt < 1) throw ConfigError(ctx + ": triangle count must be at least 1");
  for (long t = 0; t < nt; ++t) {
    const auto tok = detail::split_tokens(next_line());
    if (tok.size() != 4)
      throw ConfigError(ctx + " parse error at line " + std::to_string(line_no) +
                        ": expected 'i j k region_tag'");
    std::array<int, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      const long idx = detail::parse_int(tok[k], ctx, line_no);
      if (idx < 0 || idx >= nv)
        throw ConfigError(ctx + " parse error at line " + std::to_string(line_no) +
                          ": vertex index out of range");
      tri[k] = static_cast<int>(idx);
    }
    mesh.triangles.push_back(tri);
    mesh.region_tag.push_back(region_tag_from_string(tok[3]));
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::split_tokens(line).empty())
      throw ConfigError(ctx + " parse error at line " + std::to_string(line_no) +
                        ": trailing content");
  }
  mesh.finalize();
  validate_mesh(mesh);
  return mesh;
}

inline void write_field(const FeField& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot open '" + path + "' for writing");
  out << "field v1\n" << f.size() << "\n";
  for (double v : f.values) out << format_g17(v) << "\n";
  if (!out) throw ConfigError("io: write failed for '" + path + "'");
}

inline FeField read_field(const std::string& path, std::shared_ptr<const Mesh> mesh) {
  std::ifstream in(path);
  if (!in) throw ConfigError("io: cannot open field file '" + path + "'");
  const std::string ctx = "io: field file '" + path + "'";
  std::string line;
  int line_no = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line))
      throw ConfigError(ctx + " parse error at line " + std::to_string(line_no + 1) +
                        ": unexpected end of file");
    ++line_no;
    return line;
  };
  if (next_line() != "field v1")
    throw ConfigError(ctx + " parse error at line 1: expected header 'field v1'");
  const long n = detail::parse_int(next_line(), ctx, line_no);
  if (n != mesh->num_vertices())
    throw ConfigError(ctx + ": value count " + std::to_string(n) +
                      " does not match mesh vertex count " +
                      std::to_string(mesh->num_vertices()));
  FeField f = make_zero_field(std::move(mesh));
  for (long i = 0; i < n; ++i)
    f.values[i] = detail::parse_double(next_line(), ctx, line_no);
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::split_tokens(line).empty())
      throw ConfigError(ctx + " parse error at line " + std::to_string(line_no) +
                        ": trailing content");
  }
  return f;
}

// Legacy ASCII VTK unstructured grid with the region tag as cell data and one
// named point-data scalar per field.
inline void write_vtk(const Mesh& mesh,
                      const std::vector<std::pair<std::string, const FeField*>>& fields,
                      const std::string& path, const std::string& title = "tdt export") {
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot open '" + path + "' for writing");
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const auto& v : mesh.vertices)
    out << format_g17(v.x) << " " << format_g17(v.y) << " 0\n";
  out << "CELLS " << mesh.num_triangles() << " " << 4 * mesh.num_triangles() << "\n";
  for (const auto& tri : mesh.triangles)
    out << "3 " << tri[0] << " " << tri[1] << " " << tri[2] << "\n";
  out << "CELL_TYPES " << mesh.num_triangles() << "\n";
  for (int t = 0; t < mesh.num_triangles(); ++t) out << "5\n";
  out << "CELL_DATA " << mesh.num_triangles() << "\n";
  out << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (const auto tag : mesh.region_tag) out << static_cast<int>(tag) << "\n";
  if (!fields.empty()) {
    out << "POINT_DATA " << mesh.num_vertices() << "\n";
    for (const auto& [name, field] : fields) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : field->values) out << format_g17(v) << "\n";
    }
  }
  if (!out) throw ConfigError("io: write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// CSV tables.
// ---------------------------------------------------------------------------
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("io: cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < table.header.size(); ++c)
    out << table.header[c] << (c + 1 < table.header.size() ? "," : "");
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c)
      out << row[c] << (c + 1 < row.size() ? "," : "");
    out << "\n";
  }
  if (!out) throw ConfigError("io: write failed for '" + path + "'");
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("io: cannot open csv file '" + path + "'");
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
      if (ch == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    out.push_back(cur);
    return out;
  };
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      table.header = split(line);
      first = false;
    } else {
      table.rows.push_back(split(line));
    }
  }
  if (first) throw ConfigError("io: csv file '" + path + "' is empty");
  return table;
}

// Compares a CSV against a golden copy. Numeric cells match when
// |a - b| <= tol * (1 + max(|a|, |b|)) with the column's tolerance (or the
// default); non-numeric cells must match exactly. Returns a human-readable
// description of the first mismatch, or nullopt on success.
inline std::optional<std::string> compare_golden(
    const std::string& actual_path, const std::string& golden_path,
    double default_tol = 0.0,
    const std::map<std::string, double>& column_tol = {}) {
  const CsvTable actual = read_csv(actual_path);
  const CsvTable golden = read_csv(golden_path);
  if (actual.header != golden.header) return "header mismatch";
  if (actual.rows.size() != golden.rows.size())
    return "row count mismatch: " + std::to_string(actual.rows.size()) + " vs " +
           std::to_string(golden.rows.size());
  auto numeric = [](const std::string& s, double* v) {
    if (s.empty()) return false;
    char* end = nullptr;
    *v = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
  };
  for (std::size_t r = 0; r < actual.rows.size(); ++r) {
    if (actual.rows[r].size() != golden.rows[r].size())
      return "column count mismatch in row " + std::to_string(r + 1);
    for (std::size_t c = 0; c < actual.rows[r].size(); ++c) {
      const std::string& a = actual.rows[r][c];
      const std::string& g = golden.rows[r][c];
      double av = 0.0, gv = 0.0;
      const std::string col =
          c < actual.header.size() ? actual.header[c] : std::to_string(c);
      if (numeric(a, &av) && numeric(g, &gv)) {
        double tol = default_tol;
        if (auto it = column_tol.find(col); it != column_tol.end()) tol = it->second;
        if (std::abs(av - gv) > tol * (1.0 + std::max(std::abs(av), std::abs(gv))))
          return "mismatch at row " + std::to_string(r + 1) + ", column '" + col +
                 "': " + a + " vs " + g;
      } else if (a != g) {
        return "mismatch at row " + std::to_string(r + 1) + ", column '" + col +
               "': '" + a + "' vs '" + g + "'";
      }
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Run manifest: ordered plain-text key = value lines, with one line per
// artifact recording its FNV-1a digest and size so results can be re-checked.
// ---------------------------------------------------------------------------
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries)
      if (k == key) {
        v = value;
        return;
      }
    entries.emplace_back(key, value);
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries)
      if (k == key) return v;
    return std::nullopt;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("io: cannot open '" + path + "' for writing");
    for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
    if (!out) throw ConfigError("io: write failed for '" + path + "'");
  }

  static Manifest read(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("io: cannot open manifest '" + path + "'");
    Manifest m;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (detail::split_tokens(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("io: manifest '" + path + "' parse error at line " +
                          std::to_string(line_no) + ": expected 'key = value'");
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t");
        const auto e = s.find_last_not_of(" \t");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      m.entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return m;
  }
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("io: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// (digest, size) of a file's bytes.
inline std::pair<std::string, std::size_t> file_digest(const std::string& path) {
  const std::string bytes = read_text_file(path);
  return {hex64(fnv1a64(bytes)), bytes.size()};
}

inline bool files_byte_identical(const std::string& a, const std::string& b) {
  return read_text_file(a) == read_text_file(b);
}

}  // namespace tdt
