#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "foldgraph/errors.hpp"
#include "foldgraph/pointcloud.hpp"

namespace foldgraph {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_number(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (!tok.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("not a number: '" + std::string(tok) + "'", line_no);
  }
  return v;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

PointCloud build(std::vector<double> coords, std::optional<std::vector<double>> scalar,
                 std::size_t last_line) {
  if (coords.empty()) throw ParseError("no points", last_line);
  const std::size_t n = coords.size() / 3;
  return PointCloud(Matrix(n, 3, std::move(coords)), std::move(scalar));
}

}  // namespace

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<double> coords;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto toks = split_ws(line);
    if (toks.empty() || toks.front().front() == '#') continue;
    if (toks.size() != 3) {
      throw ParseError("expected 3 coordinates, found " + std::to_string(toks.size()), line_no);
    }
    for (const auto tok : toks) coords.push_back(parse_number(tok, line_no));
  }
  return build(std::move(coords), std::nullopt, line_no);
}

void write_xyz(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]) << '\n';
  }
  finish(out, path);
}

PointCloud read_ply_ascii(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError("missing 'ply' magic", line_no);

  std::size_t vertex_count = 0;
  bool seen_vertex = false, in_vertex = false, seen_format = false;
  std::vector<std::string> props;
  while (true) {
    if (!next_line()) throw ParseError("unexpected end of header", line_no);
    const auto toks = split_ws(line);
    if (toks.empty() || toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "end_header") break;
    if (toks[0] == "format") {
      if (toks.size() != 3 || toks[1] != "ascii" || toks[2] != "1.0") {
        throw ParseError("only 'format ascii 1.0' is supported", line_no);
      }
      seen_format = true;
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError("malformed element line", line_no);
      in_vertex = toks[1] == "vertex";
      if (in_vertex) {
        if (seen_vertex) throw ParseError("duplicate vertex element", line_no);
        seen_vertex = true;
        vertex_count = static_cast<std::size_t>(parse_number(toks[2], line_no));
      } else if (!seen_vertex) {
        throw ParseError("vertex element must come first", line_no);
      }
    } else if (toks[0] == "property") {
      if (toks.size() < 3) throw ParseError("malformed property line", line_no);
      if (in_vertex) {
        if (toks[1] == "list") throw ParseError("list properties on vertices are not supported", line_no);
        props.emplace_back(toks.back());
      }
    } else {
      throw ParseError("unknown header keyword '" + std::string(toks[0]) + "'", line_no);
    }
  }
  if (!seen_format) throw ParseError("missing format line", line_no);
  if (!seen_vertex) throw ParseError("missing vertex element", line_no);

  auto index_of = [&](std::string_view name) -> std::ptrdiff_t {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<std::ptrdiff_t>(i);
    return -1;
  };
  const std::ptrdiff_t ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
  const std::ptrdiff_t is = index_of("scalar");
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", line_no);

  std::vector<double> coords;
  coords.reserve(vertex_count * 3);
  std::optional<std::vector<double>> scalar;
  if (is >= 0) scalar.emplace().reserve(vertex_count);
  for (std::size_t v = 0; v < vertex_count; ++v) {
    if (!next_line()) throw ParseError("expected " + std::to_string(vertex_count) + " vertices", line_no + 1);
    const auto toks = split_ws(line);
    if (toks.size() != props.size()) {
      throw ParseError("expected " + std::to_string(props.size()) + " values, found " +
                           std::to_string(toks.size()),
                       line_no);
    }
    coords.push_back(parse_number(toks[static_cast<std::size_t>(ix)], line_no));
    coords.push_back(parse_number(toks[static_cast<std::size_t>(iy)], line_no));
    coords.push_back(parse_number(toks[static_cast<std::size_t>(iz)], line_no));
    if (scalar) scalar->push_back(parse_number(toks[static_cast<std::size_t>(is)], line_no));
  }
  return build(std::move(coords), std::move(scalar), line_no);
}

void write_ply_ascii(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out = open_out(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << '\n'
      << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_scalar()) out << "property double scalar\n";
  out << "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2]);
    if (cloud.has_scalar()) out << ' ' << format_double((*cloud.scalar())[i]);
    out << '\n';
  }
  finish(out, path);
}

PointCloud read_cloud(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".xyz") return read_xyz(path);
  if (ext == ".ply") return read_ply_ascii(path);
  throw DomainError("unsupported point cloud extension '" + ext + "' (expected .xyz or .ply)");
}

}  // namespace foldgraph
