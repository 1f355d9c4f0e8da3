#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "blowup/pde.hpp"

namespace blowup {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// 17 significant digits round-trips every double
inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// accepts subnormals, unlike std::stod
inline double parse_double(const std::string& s) {
  const char* b = s.c_str();
  char* e = nullptr;
  double v = std::strtod(b, &e);
  if (e == b || *e != '\0') throw IoError("not a number: '" + s + "'");
  return v;
}

using CsvCell = std::variant<double, long, std::string>;

inline std::string csv_cell(const CsvCell& c) {
  if (auto d = std::get_if<double>(&c)) return fmt_double(*d);
  if (auto l = std::get_if<long>(&c)) return std::to_string(*l);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path), cols_(header.size()) {
    if (!out_) throw IoError("cannot open " + path);
    if (header.empty()) throw IoError("CSV header is mandatory");
    line(std::vector<CsvCell>(header.begin(), header.end()));
  }

  void row(const std::vector<CsvCell>& cells) {
    if (cells.size() != cols_) throw IoError("CSV row width does not match the header");
    line(cells);
  }
  void row_values(const std::vector<double>& v) { row(std::vector<CsvCell>(v.begin(), v.end())); }

 private:
  void line(const std::vector<CsvCell>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << csv_cell(cells[i]);
    out_ << '\n';
  }
  std::ofstream out_;
  size_t cols_;
};

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string ln;
  while (std::getline(in, ln)) {
    if (ln.empty() || ln[0] == '#') continue;
    std::vector<std::string> r;
    std::string cur;
    bool q = false;
    for (size_t i = 0; i < ln.size(); ++i) {
      char c = ln[i];
      if (q) {
        if (c == '"' && i + 1 < ln.size() && ln[i + 1] == '"') cur += '"', ++i;
        else if (c == '"') q = false;
        else cur += c;
      } else if (c == '"') q = true;
      else if (c == ',') r.push_back(cur), cur.clear();
      else cur += c;
    }
    r.push_back(cur);
    rows.push_back(std::move(r));
  }
  return rows;
}

// "# frame=similarity time=... n=1 L=... N=..." then y1[,y2],value rows
inline void write_field_csv(const Field& F, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path);
  out << "# frame=" << to_string(F.frame) << " time=" << fmt_double(F.time) << " n=" << F.grid.dim
      << " L=" << fmt_double(F.grid.L) << " N=" << F.grid.N << " index=" << F.frame_index << '\n';
  out << (F.grid.dim == 1 ? "y1,value\n" : "y1,y2,value\n");
  for (size_t k = 0; k < F.grid.size(); ++k) {
    for (double c : F.grid.point(k)) out << fmt_double(c) << ',';
    out << fmt_double(F.values[k]) << '\n';
  }
}

inline Frame frame_from_string(const std::string& s) {
  if (s == to_string(Frame::Physical)) return Frame::Physical;
  if (s == to_string(Frame::Similarity)) return Frame::Similarity;
  throw IoError("unknown frame '" + s + "'");
}

inline Field read_field_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string head;
  std::getline(in, head);
  if (head.rfind("# ", 0) != 0) throw IoError(path + ": missing field header");
  Field F;
  std::istringstream hs(head.substr(2));
  std::string kv;
  int seen = 0;
  while (hs >> kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw IoError(path + ": malformed header entry " + kv);
    std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
    if (k == "frame") F.frame = frame_from_string(v), ++seen;
    else if (k == "time") F.time = parse_double(v), ++seen;
    else if (k == "n") F.grid.dim = std::stoi(v), ++seen;
    else if (k == "L") F.grid.L = parse_double(v), ++seen;
    else if (k == "N") F.grid.N = std::stoi(v), ++seen;
    else if (k == "index") F.frame_index = std::stol(v);
  }
  if (seen != 5) throw IoError(path + ": incomplete field header");
  auto rows = read_csv(path);
  if (rows.size() != F.grid.size() + 1) throw IoError(path + ": row count does not match the grid");
  F.values.resize(F.grid.size());
  for (size_t k = 0; k < F.grid.size(); ++k) F.values[k] = parse_double(rows[k + 1].back());
  return F;
}

namespace detail {
constexpr char kFieldMagic[8] = {'B', 'U', 'F', 'I', 'E', 'L', 'D', '1'};
template <class T>
void put(std::ostream& o, const T& v) { o.write(reinterpret_cast<const char*>(&v), sizeof v); }
template <class T>
T get(std::istream& i) {
  T v{};
  if (!i.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("truncated binary field");
  return v;
}
}  // namespace detail

// native-endian doubles
inline void write_field_bin(const Field& F, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path);
  out.write(detail::kFieldMagic, 8);
  detail::put<int32_t>(out, static_cast<int32_t>(F.frame));
  detail::put<int32_t>(out, F.grid.dim);
  detail::put<int64_t>(out, F.grid.N);
  detail::put<int64_t>(out, F.frame_index);
  detail::put(out, F.grid.L);
  detail::put(out, F.time);
  out.write(reinterpret_cast<const char*>(F.values.data()), std::streamsize(F.values.size() * sizeof(double)));
}

inline Field read_field_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::string(magic, 8) != std::string(detail::kFieldMagic, 8))
    throw IoError(path + ": not a binary field file");
  Field F;
  F.frame = static_cast<Frame>(detail::get<int32_t>(in));
  F.grid.dim = detail::get<int32_t>(in);
  F.grid.N = static_cast<int>(detail::get<int64_t>(in));
  F.frame_index = detail::get<int64_t>(in);
  F.grid.L = detail::get<double>(in);
  F.time = detail::get<double>(in);
  if (F.grid.dim < 1 || F.grid.dim > 2 || F.grid.N < 3) throw IoError(path + ": bad grid");
  F.values.resize(F.grid.size());
  if (!in.read(reinterpret_cast<char*>(F.values.data()), std::streamsize(F.values.size() * sizeof(double))))
    throw IoError(path + ": truncated binary field");
  return F;
}

}  // namespace blowup
