#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ckd/error.hpp"
#include "ckd/matrix.hpp"

namespace ckd {

enum class ColumnKind { numeric, categorical };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  std::vector<std::string> categories;  // sorted ascending; empty for numeric
};

// One parsed cell. The flag is the only missing marker; `num`/`cat` are
// meaningful only when present and only for the column's kind.
struct Cell {
  bool missing = true;
  double num = 0.0;
  std::string cat;

  static Cell none() { return Cell{}; }
  static Cell number(double v) { return Cell{false, v, {}}; }
  static Cell category(std::string s) { return Cell{false, 0.0, std::move(s)}; }
};

struct Dataset {
  std::vector<ColumnSchema> schemas;
  std::vector<std::vector<Cell>> cells;  // row-major, one Cell per schema
  std::string target_name;

  std::size_t n_rows() const { return cells.size(); }
  std::size_t n_cols() const { return schemas.size(); }

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < schemas.size(); ++i)
      if (schemas[i].name == name) return i;
    fail("ingest", "no column named '" + name + "'");
  }
};

// Label-encoded feature matrix. Missing cells are tracked by the mask; the
// value slot under a masked cell is NaN and must not be read.
struct EncodedMatrix {
  std::vector<std::string> feature_names;
  std::vector<bool> feature_categorical;  // per feature, true if label-encoded
  Matrix values;
  std::vector<bool> missing;  // rows*cols
  std::vector<int> labels;
  std::vector<std::string> label_names;                    // code -> category
  std::vector<std::vector<std::string>> feature_categories;  // code -> category, per feature

  bool is_missing(std::size_t r, std::size_t c) const {
    return missing[r * values.cols + c];
  }
  void set_missing(std::size_t r, std::size_t c, bool m) {
    missing[r * values.cols + c] = m;
  }
  std::size_t missing_count(std::size_t c) const {
    std::size_t n = 0;
    for (std::size_t r = 0; r < values.rows; ++r)
      if (is_missing(r, c)) ++n;
    return n;
  }
  std::size_t feature_index(const std::string& name) const {
    for (std::size_t i = 0; i < feature_names.size(); ++i)
      if (feature_names[i] == name) return i;
    fail("ingest", "no feature named '" + name + "'");
  }
};

namespace detail {

// The raw UCI file is dirty: stray tabs and "\t?" tokens. Trim both ends.
inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (std::isspace(static_cast<unsigned char>(s[b])) != 0)) ++b;
  while (e > b && (std::isspace(static_cast<unsigned char>(s[e - 1])) != 0)) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '\'' && s.back() == '\'') ||
                        (s.front() == '"' && s.back() == '"')))
    return s.substr(1, s.size() - 2);
  return s;
}

inline std::optional<double> parse_number(const std::string& token) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline Cell parse_cell(const std::string& raw, const ColumnSchema& schema,
                       std::size_t line_no) {
  const std::string tok = trim(raw);
  if (tok.empty() || tok == "?") return Cell::none();
  if (schema.kind == ColumnKind::numeric) {
    auto v = parse_number(tok);
    if (!v)
      fail("ingest", "line " + std::to_string(line_no) + ": '" + tok +
                         "' is not numeric in column '" + schema.name + "'");
    return Cell::number(*v);
  }
  if (!std::binary_search(schema.categories.begin(), schema.categories.end(), tok))
    fail("ingest", "line " + std::to_string(line_no) + ": unknown category '" + tok +
                       "' in column '" + schema.name + "'");
  return Cell::category(tok);
}

inline void validate_dataset(Dataset& ds) {
  std::map<std::string, int> seen;
  for (const auto& s : ds.schemas) {
    if (++seen[s.name] > 1) fail("ingest", "duplicate column name '" + s.name + "'");
  }
}

}  // namespace detail

// ARFF subset: @relation, @attribute <name> numeric|real|integer|{a,b,...},
// then @data with comma-separated rows. '%' starts a comment, '?' is missing.
inline Dataset load_arff(std::istream& in, const std::string& target_name) {
  Dataset ds;
  ds.target_name = target_name;
  std::string line;
  std::size_t line_no = 0;
  bool in_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '%') continue;
    if (!in_data) {
      const std::string lt = detail::lower(t);
      if (lt.rfind("@relation", 0) == 0) continue;
      if (lt.rfind("@data", 0) == 0) {
        if (ds.schemas.empty())
          fail("ingest", "line " + std::to_string(line_no) + ": @data before any @attribute");
        in_data = true;
        continue;
      }
      if (lt.rfind("@attribute", 0) == 0) {
        std::string rest = detail::trim(t.substr(std::string("@attribute").size()));
        // Name runs to the first whitespace unless quoted.
        std::string name;
        std::size_t pos = 0;
        if (!rest.empty() && (rest[0] == '\'' || rest[0] == '"')) {
          const char quote = rest[0];
          std::size_t end = rest.find(quote, 1);
          if (end == std::string::npos)
            fail("ingest", "line " + std::to_string(line_no) + ": unterminated quoted name");
          name = rest.substr(1, end - 1);
          pos = end + 1;
        } else {
          std::size_t end = rest.find_first_of(" \t{");
          if (end == std::string::npos)
            fail("ingest", "line " + std::to_string(line_no) + ": attribute without a type");
          name = rest.substr(0, end);
          pos = end;
        }
        std::string type = detail::trim(rest.substr(pos));
        if (type.empty())
          fail("ingest", "line " + std::to_string(line_no) + ": attribute without a type");
        ColumnSchema schema;
        schema.name = name;
        if (type.front() == '{') {
          if (type.back() != '}')
            fail("ingest", "line " + std::to_string(line_no) + ": unterminated category list");
          schema.kind = ColumnKind::categorical;
          for (const auto& part :
               detail::split_csv_line(type.substr(1, type.size() - 2))) {
            const std::string cat = detail::unquote(detail::trim(part));
            if (cat.empty())
              fail("ingest", "line " + std::to_string(line_no) + ": empty category");
            schema.categories.push_back(cat);
          }
          std::sort(schema.categories.begin(), schema.categories.end());
          schema.categories.erase(
              std::unique(schema.categories.begin(), schema.categories.end()),
              schema.categories.end());
        } else {
          const std::string lt2 = detail::lower(type);
          if (lt2 != "numeric" && lt2 != "real" && lt2 != "integer")
            fail("ingest", "line " + std::to_string(line_no) + ": unsupported type '" +
                               type + "'");
          schema.kind = ColumnKind::numeric;
        }
        ds.schemas.push_back(std::move(schema));
        continue;
      }
      fail("ingest", "line " + std::to_string(line_no) + ": unrecognized header line");
    } else {
      auto tokens = detail::split_csv_line(t);
      if (tokens.size() != ds.schemas.size())
        fail("ingest", "row at line " + std::to_string(line_no) + " has " +
                           std::to_string(tokens.size()) + " cells, expected " +
                           std::to_string(ds.schemas.size()));
      std::vector<Cell> row;
      row.reserve(tokens.size());
      for (std::size_t c = 0; c < tokens.size(); ++c)
        row.push_back(detail::parse_cell(tokens[c], ds.schemas[c], line_no));
      ds.cells.push_back(std::move(row));
    }
  }
  if (!in_data) fail("ingest", "no @data section");
  detail::validate_dataset(ds);
  return ds;
}

// CSV: comma separator, header row, no quoting. Column kind is inferred:
// numeric iff every non-missing cell parses as a number.
inline Dataset load_csv(std::istream& in, const std::string& target_name) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.empty()) fail("ingest", "empty CSV file");

  Dataset ds;
  ds.target_name = target_name;
  for (const auto& name : detail::split_csv_line(lines[0])) {
    ColumnSchema s;
    s.name = detail::trim(name);
    if (s.name.empty()) fail("ingest", "empty column name in CSV header");
    ds.schemas.push_back(std::move(s));
  }

  // First pass: token grid + per-column kind inference.
  std::vector<std::vector<std::string>> grid;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (detail::trim(lines[i]).empty()) continue;
    auto tokens = detail::split_csv_line(lines[i]);
    if (tokens.size() != ds.schemas.size())
      fail("ingest", "row at line " + std::to_string(i + 1) + " has " +
                         std::to_string(tokens.size()) + " cells, expected " +
                         std::to_string(ds.schemas.size()));
    for (auto& tok : tokens) tok = detail::trim(tok);
    grid.push_back(std::move(tokens));
  }
  for (std::size_t c = 0; c < ds.schemas.size(); ++c) {
    bool numeric = true;
    std::vector<std::string> cats;
    for (const auto& row : grid) {
      const std::string& tok = row[c];
      if (tok.empty() || tok == "?") continue;
      if (!detail::parse_number(tok)) numeric = false;
      cats.push_back(tok);
    }
    if (numeric) continue;
    std::sort(cats.begin(), cats.end());
    cats.erase(std::unique(cats.begin(), cats.end()), cats.end());
    ds.schemas[c].kind = ColumnKind::categorical;
    ds.schemas[c].categories = std::move(cats);
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<Cell> row;
    row.reserve(ds.schemas.size());
    for (std::size_t c = 0; c < ds.schemas.size(); ++c)
      row.push_back(detail::parse_cell(grid[i][c], ds.schemas[c], i + 2));
    ds.cells.push_back(std::move(row));
  }
  detail::validate_dataset(ds);
  return ds;
}

enum class FileFormat { arff, csv };

inline Dataset load_dataset(const std::string& path, FileFormat format,
                            const std::string& target_name = "class") {
  std::ifstream in(path);
  if (!in) fail("ingest", "cannot open '" + path + "'");
  switch (format) {
    case FileFormat::arff:
      return load_arff(in, target_name);
    case FileFormat::csv:
      return load_csv(in, target_name);
  }
  fail("ingest", "unknown format");
}

inline FileFormat parse_format(const std::string& tag) {
  if (tag == "arff") return FileFormat::arff;
  if (tag == "csv") return FileFormat::csv;
  fail("ingest", "unknown format tag '" + tag + "' (expected arff or csv)");
}

// Label encoding: categorical codes follow ascending lexicographic category
// order; numeric columns pass through; the binary target maps the
// lexicographically smaller category to 0.
inline EncodedMatrix encode(const Dataset& ds) {
  const std::size_t target = ds.column_index(ds.target_name);
  const ColumnSchema& tschema = ds.schemas[target];
  require(tschema.kind == ColumnKind::categorical, "ingest",
          "target column '" + ds.target_name + "' must be categorical");
  require(tschema.categories.size() == 2, "ingest",
          "target column must have exactly 2 categories, found " +
              std::to_string(tschema.categories.size()));

  EncodedMatrix m;
  m.label_names = tschema.categories;  // already sorted ascending
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < ds.n_cols(); ++c) {
    if (c == target) continue;
    feature_cols.push_back(c);
    m.feature_names.push_back(ds.schemas[c].name);
    m.feature_categorical.push_back(ds.schemas[c].kind == ColumnKind::categorical);
    m.feature_categories.push_back(ds.schemas[c].categories);
  }

  const std::size_t rows = ds.n_rows();
  const std::size_t cols = feature_cols.size();
  m.values = Matrix(rows, cols, std::numeric_limits<double>::quiet_NaN());
  m.missing.assign(rows * cols, false);
  m.labels.resize(rows);

  for (std::size_t r = 0; r < rows; ++r) {
    const Cell& tc = ds.cells[r][target];
    if (tc.missing)
      fail("ingest", "target column has a missing cell at row " + std::to_string(r));
    m.labels[r] = (tc.cat == m.label_names[0]) ? 0 : 1;
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t c = feature_cols[j];
      const Cell& cell = ds.cells[r][c];
      if (cell.missing) {
        m.missing[r * cols + j] = true;
        continue;
      }
      if (ds.schemas[c].kind == ColumnKind::numeric) {
        m.values.at(r, j) = cell.num;
      } else {
        const auto& cats = ds.schemas[c].categories;
        auto it = std::lower_bound(cats.begin(), cats.end(), cell.cat);
        if (it == cats.end() || *it != cell.cat)
          fail("ingest", "unseen category '" + cell.cat + "' in column '" +
                             ds.schemas[c].name + "'");
        m.values.at(r, j) = static_cast<double>(it - cats.begin());
      }
    }
  }
  return m;
}

// Inverse of the categorical encoding, for round-trip checks.
inline std::string decode_category(const EncodedMatrix& m, std::size_t feature,
                                   double code) {
  const auto& cats = m.feature_categories[feature];
  const auto idx = static_cast<std::size_t>(code);
  require(!cats.empty(), "ingest", "feature is not categorical");
  require(idx < cats.size() && static_cast<double>(idx) == code, "ingest",
          "code does not map to a category");
  return cats[idx];
}

}  // namespace ckd
