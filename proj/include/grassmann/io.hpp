#ifndef GRASSMANN_IO_HPP
#define GRASSMANN_IO_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "grassmann/coding.hpp"
#include "grassmann/errors.hpp"
#include "grassmann/geometry.hpp"
#include "grassmann/kernel.hpp"

namespace grassmann::io {

namespace fs = std::filesystem;

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidArgument, where + ": '" + s + "' is not a number");
}

inline long long parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidArgument, where + ": '" + s + "' is not an integer");
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file, then renames over the target.
inline void atomic_write(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    detail::require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    detail::require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  detail::require(!ec, ErrorCode::Io, "cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// Matrices

inline std::string matrix_to_csv(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Matrix matrix_from_csv(const std::string& text, const std::string& name) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line)) row.push_back(parse_double(cell, name + ":" + std::to_string(lineno)));
    if (!rows.empty())
      detail::require(row.size() == rows.front().size(), ErrorCode::InvalidArgument,
                      name + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  detail::require(!rows.empty(), ErrorCode::InvalidArgument, name + ": empty matrix file");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

inline Matrix read_matrix(const fs::path& path) { return matrix_from_csv(read_text(path), path.string()); }

inline void write_matrix(const fs::path& path, const Matrix& m) { atomic_write(path, matrix_to_csv(m)); }

/// Loads a d x p basis, rejects it when ||X^T X - I||_max > tol and
/// re-orthonormalizes otherwise.
inline GrassmannPoint read_subspace(const fs::path& path, double tol = 1e-6) {
  const Matrix raw = read_matrix(path);
  const Matrix gram = raw.transpose() * raw;
  const double err = (gram - Matrix::Identity(raw.cols(), raw.cols())).cwiseAbs().maxCoeff();
  detail::require(raw.rows() > raw.cols() && err <= tol, ErrorCode::InvalidArgument,
                  path.string() + ": not an orthonormal basis (error " + format_double(err) + ")");
  return orthonormalize(raw, raw.cols());
}

inline void write_subspace(const fs::path& path, const GrassmannPoint& x) { write_matrix(path, x.basis()); }

// ---------------------------------------------------------------------------
// key=value text

using KeyValues = std::map<std::string, std::string>;

inline KeyValues parse_key_values(const std::string& text, const std::string& name) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';' || t.front() == '[') continue;
    const auto eq = t.find('=');
    detail::require(eq != std::string::npos, ErrorCode::InvalidArgument,
                    name + ":" + std::to_string(lineno) + ": expected key=value");
    kv[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
  }
  return kv;
}

inline std::string key_values_to_text(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

/// 64-bit FNV-1a, hex encoded.
inline std::string fnv1a_hex(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Manifests and subspace indexes
//
//   kind=samples          (or subspace)
//   d=20                  optional; checked against every matrix
//   center=1
//   unit_variance=0
//   id,path,label,split
//   a01,sets/a01.csv,0,train
//
// Paths are relative to the manifest's directory.

struct ManifestEntry {
  std::string id;
  fs::path path;  // as written
  int label = 0;
  std::string split;
};

struct Manifest {
  fs::path root;
  KeyValues globals;
  std::vector<ManifestEntry> entries;

  std::string kind() const {
    const auto it = globals.find("kind");
    return it == globals.end() ? "samples" : it->second;
  }
  bool flag(const std::string& key) const {
    const auto it = globals.find(key);
    return it != globals.end() && (it->second == "1" || it->second == "true");
  }
  fs::path resolve(const ManifestEntry& e) const { return e.path.is_absolute() ? e.path : root / e.path; }

  std::vector<const ManifestEntry*> select(const std::string& split_tag) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
      if (split_tag.empty() || e.split == split_tag) out.push_back(&e);
    return out;
  }
};

inline Manifest parse_manifest(const std::string& text, const fs::path& root, const std::string& name) {
  Manifest m;
  m.root = root;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  bool in_table = false;
  std::map<std::string, std::size_t> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (!in_table) {
      if (t.rfind("id,", 0) == 0) {
        const auto cols = split(t);
        detail::require(cols == std::vector<std::string>{"id", "path", "label", "split"}, ErrorCode::InvalidArgument,
                        where + ": header must be id,path,label,split");
        in_table = true;
        continue;
      }
      const auto eq = t.find('=');
      detail::require(eq != std::string::npos, ErrorCode::InvalidArgument, where + ": expected key=value or header");
      m.globals[trim(std::string_view(t).substr(0, eq))] = trim(std::string_view(t).substr(eq + 1));
      continue;
    }
    const auto cols = split(t);
    detail::require(cols.size() == 4, ErrorCode::InvalidArgument, where + ": expected 4 columns");
    detail::require(!cols[0].empty(), ErrorCode::InvalidArgument, where + ": empty id");
    detail::require(seen.emplace(cols[0], lineno).second, ErrorCode::InvalidArgument,
                    where + ": duplicate id '" + cols[0] + "'");
    detail::require(!cols[2].empty(), ErrorCode::InvalidArgument, where + ": entry '" + cols[0] + "' has no label");
    const long long label = parse_int(cols[2], where);
    detail::require(label >= 0 && label <= 1'000'000, ErrorCode::InvalidArgument,
                    where + ": label must be a non-negative integer");
    m.entries.push_back(ManifestEntry{cols[0], fs::path(cols[1]), static_cast<int>(label), cols[3]});
  }
  detail::require(in_table, ErrorCode::InvalidArgument, name + ": missing id,path,label,split header");
  const auto k = m.kind();
  detail::require(k == "samples" || k == "subspace", ErrorCode::InvalidArgument,
                  name + ": kind must be samples or subspace");
  return m;
}

/// Parses and checks that every referenced file exists.
inline Manifest read_manifest(const fs::path& path) {
  Manifest m = parse_manifest(read_text(path), path.parent_path(), path.string());
  for (const auto& e : m.entries)
    detail::require(fs::is_regular_file(m.resolve(e)), ErrorCode::Io,
                    "entry '" + e.id + "': missing file " + m.resolve(e).string());
  return m;
}

inline std::string manifest_to_text(const Manifest& m) {
  std::string out = key_values_to_text(m.globals);
  out += "id,path,label,split\n";
  for (const auto& e : m.entries)
    out += e.id + "," + e.path.generic_string() + "," + std::to_string(e.label) + "," + e.split + "\n";
  return out;
}

inline void write_manifest(const fs::path& path, const Manifest& m) { atomic_write(path, manifest_to_text(m)); }

/// Loads a subspace index: points, labels and ids in file order.
struct SubspaceSet {
  std::vector<std::string> ids;
  std::vector<GrassmannPoint> points;
  std::vector<int> labels;
};

inline SubspaceSet load_subspaces(const Manifest& m, const std::string& split_tag = {}) {
  detail::require(m.kind() == "subspace", ErrorCode::InvalidArgument, "index kind must be subspace");
  SubspaceSet out;
  for (const ManifestEntry* e : m.select(split_tag)) {
    try {
      out.points.push_back(read_subspace(m.resolve(*e)));
    } catch (const Error& err) {
      throw Error(err.code(), "entry '" + e->id + "': " + err.what());
    }
    out.ids.push_back(e->id);
    out.labels.push_back(e->label);
  }
  for (const auto& x : out.points)
    detail::require(x.ambient() == out.points.front().ambient() && x.order() == out.points.front().order(),
                    ErrorCode::DimensionMismatch, "subspaces in an index must share (d, p)");
  return out;
}

// ---------------------------------------------------------------------------
// Dictionary directories
//
// meta.txt holds kind, N, p, d, method, kernel and comma-separated atom
// labels (empty when unlabeled). Explicit atoms are atom_NNN.csv; kernel
// atoms are atom_NNN_support.csv plus atom_NNN_coeff.csv.

struct DictionaryMeta {
  std::string kind;  // grassmann | kernel
  std::size_t atoms = 0;
  Eigen::Index p = 0;
  Eigen::Index d = 0;
  std::string method;
  KernelFunction kernel;
  std::vector<int> labels;
};

inline std::string atom_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "atom_%03zu", i);
  return buf;
}

inline std::string labels_to_text(const std::vector<int>& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? "," : "") + std::to_string(labels[i]);
  return s;
}

inline void write_meta(const fs::path& dir, const DictionaryMeta& meta) {
  KeyValues kv{{"kind", meta.kind},
               {"N", std::to_string(meta.atoms)},
               {"p", std::to_string(meta.p)},
               {"d", std::to_string(meta.d)},
               {"method", meta.method},
               {"kernel", meta.kernel.to_string()},
               {"labels", labels_to_text(meta.labels)}};
  atomic_write(dir / "meta.txt", key_values_to_text(kv));
}

inline DictionaryMeta read_meta(const fs::path& dir) {
  const fs::path path = dir / "meta.txt";
  const KeyValues kv = parse_key_values(read_text(path), path.string());
  auto get = [&](const std::string& k) {
    const auto it = kv.find(k);
    detail::require(it != kv.end(), ErrorCode::InvalidArgument, path.string() + ": missing key '" + k + "'");
    return it->second;
  };
  DictionaryMeta meta;
  meta.kind = get("kind");
  detail::require(meta.kind == "grassmann" || meta.kind == "kernel", ErrorCode::InvalidArgument,
                  path.string() + ": unknown dictionary kind '" + meta.kind + "'");
  meta.atoms = static_cast<std::size_t>(parse_int(get("N"), path.string()));
  meta.p = static_cast<Eigen::Index>(parse_int(get("p"), path.string()));
  meta.d = static_cast<Eigen::Index>(parse_int(get("d"), path.string()));
  meta.method = get("method");
  meta.kernel = KernelFunction::parse(get("kernel"));
  const std::string labels = get("labels");
  if (!labels.empty())
    for (const auto& l : split(labels)) meta.labels.push_back(static_cast<int>(parse_int(l, path.string())));
  detail::require(meta.labels.empty() || meta.labels.size() == meta.atoms, ErrorCode::InvalidArgument,
                  path.string() + ": label count does not match N");
  return meta;
}

inline void save_dictionary(const fs::path& dir, const GrassmannDictionary& dict, const std::string& method) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < dict.size(); ++i) write_subspace(dir / (atom_stem(i) + ".csv"), dict.atom(i));
  write_meta(dir, DictionaryMeta{"grassmann", dict.size(), dict.order(), dict.ambient(), method,
                                 KernelFunction::linear(), dict.labels()});
}

inline void save_dictionary(const fs::path& dir, const KernelDictionary& dict, const std::string& method) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < dict.size(); ++i) {
    write_matrix(dir / (atom_stem(i) + "_support.csv"), dict.atom(i).samples());
    write_matrix(dir / (atom_stem(i) + "_coeff.csv"), dict.atom(i).coeff());
  }
  write_meta(dir, DictionaryMeta{"kernel", dict.size(), dict.order(), dict.atom(0).sample_dim(), method,
                                 dict.kernel(), dict.labels()});
}

inline GrassmannDictionary load_grassmann_dictionary(const fs::path& dir) {
  const DictionaryMeta meta = read_meta(dir);
  detail::require(meta.kind == "grassmann", ErrorCode::InvalidArgument, dir.string() + " holds a kernel dictionary");
  std::vector<GrassmannPoint> atoms;
  for (std::size_t i = 0; i < meta.atoms; ++i) {
    atoms.push_back(read_subspace(dir / (atom_stem(i) + ".csv")));
    detail::require(atoms.back().ambient() == meta.d && atoms.back().order() == meta.p, ErrorCode::DimensionMismatch,
                    dir.string() + ": atom " + std::to_string(i) + " does not match meta (d, p)");
  }
  return GrassmannDictionary(std::move(atoms), meta.labels);
}

/// Kernel atoms are revalidated: A^T K A must be the identity within 1e-6.
inline KernelDictionary load_kernel_dictionary(const fs::path& dir) {
  const DictionaryMeta meta = read_meta(dir);
  detail::require(meta.kind == "kernel", ErrorCode::InvalidArgument, dir.string() + " holds an explicit dictionary");
  std::vector<KernelSubspace> atoms;
  for (std::size_t i = 0; i < meta.atoms; ++i) {
    auto support = std::make_shared<const Matrix>(read_matrix(dir / (atom_stem(i) + "_support.csv")));
    Matrix coeff = read_matrix(dir / (atom_stem(i) + "_coeff.csv"));
    detail::require(support->rows() == meta.d && coeff.cols() == meta.p, ErrorCode::DimensionMismatch,
                    dir.string() + ": atom " + std::to_string(i) + " does not match meta (d, p)");
    atoms.emplace_back(std::move(support), std::move(coeff), meta.kernel);
    detail::require(atoms.back().orthonormality_error() <= 1e-6, ErrorCode::InvalidArgument,
                    dir.string() + ": atom " + std::to_string(i) + " is not orthonormal in feature space");
  }
  return KernelDictionary(std::move(atoms), meta.labels);
}

}  // namespace grassmann::io

#endif  // GRASSMANN_IO_HPP
