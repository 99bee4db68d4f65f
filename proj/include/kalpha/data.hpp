#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "kalpha/error.hpp"

namespace kalpha {

/// Index into a DataMatrix's label set. Categories compare only by equality.
struct Category {
  std::uint32_t code = 0;
  friend constexpr bool operator==(Category, Category) = default;
};

/// One observed score. Missingness is never a value; it is the absence of a
/// score in its unit's row.
using ScoreValue = std::variant<double, Category>;

enum class ValueMode { numeric, categorical };

/// Units-by-coders scores, stored ragged: row i holds only the n_i observed
/// scores of unit i. Scores live in one flat array so that (unit, slot) pairs
/// have a stable flat index, which the distance table relies on.
///
/// Categorical scores are stored as their label index; `labels()` maps the
/// index back to the verbatim label text.
class DataMatrix {
 public:
  DataMatrix() = default;

  /// Builds a matrix from observed scores per unit. `coders`, when non-empty,
  /// gives the column of every score (same shape as `rows`).
  DataMatrix(const std::vector<std::vector<double>>& rows, ValueMode mode = ValueMode::numeric,
             std::vector<std::string> labels = {}, std::vector<std::string> unit_ids = {},
             std::vector<std::string> coder_labels = {},
             const std::vector<std::vector<std::uint32_t>>& coders = {})
      : mode_(mode), labels_(std::move(labels)), unit_ids_(std::move(unit_ids)),
        coder_labels_(std::move(coder_labels)) {
    if (!coders.empty() && coders.size() != rows.size()) {
      throw PreconditionError("coder index rows do not match score rows");
    }
    offsets_.reserve(rows.size() + 1);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (!coders.empty() && coders[i].size() != row.size()) {
        throw PreconditionError("coder index row " + std::to_string(i + 1) + " has wrong length");
      }
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double v = row[j];
        if (mode_ == ValueMode::categorical &&
            (v < 0 || v != static_cast<double>(static_cast<std::uint32_t>(v)) ||
             (!labels_.empty() && v >= static_cast<double>(labels_.size())))) {
          throw PreconditionError("categorical score is not a valid label index");
        }
        values_.push_back(v);
        coders_.push_back(coders.empty() ? static_cast<std::uint32_t>(j) : coders[i][j]);
      }
      offsets_.push_back(values_.size());
    }
    if (unit_ids_.empty()) {
      unit_ids_.reserve(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) unit_ids_.push_back(std::to_string(i + 1));
    } else if (unit_ids_.size() != rows.size()) {
      throw PreconditionError("unit id count does not match unit count");
    }
  }

  [[nodiscard]] std::size_t units() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  [[nodiscard]] std::size_t total() const noexcept { return values_.size(); }
  [[nodiscard]] std::size_t count(std::size_t unit) const { return offsets_[unit + 1] - offsets_[unit]; }
  [[nodiscard]] std::size_t offset(std::size_t unit) const { return offsets_[unit]; }
  [[nodiscard]] bool empty() const noexcept { return units() == 0; }

  [[nodiscard]] std::span<const double> row(std::size_t unit) const {
    return {values_.data() + offsets_[unit], count(unit)};
  }
  [[nodiscard]] std::span<const std::uint32_t> row_coders(std::size_t unit) const {
    return {coders_.data() + offsets_[unit], count(unit)};
  }
  /// All scores in flat (unit, slot) order.
  [[nodiscard]] std::span<const double> flat() const noexcept { return values_; }

  [[nodiscard]] ScoreValue score(std::size_t unit, std::size_t slot) const { return at(offsets_[unit] + slot); }
  [[nodiscard]] ScoreValue at(std::size_t flat_index) const {
    const double v = values_[flat_index];
    if (mode_ == ValueMode::categorical) return Category{static_cast<std::uint32_t>(v)};
    return v;
  }

  [[nodiscard]] std::vector<std::size_t> counts() const {
    std::vector<std::size_t> out(units());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = count(i);
    return out;
  }

  [[nodiscard]] bool balanced() const {
    for (std::size_t i = 1; i < units(); ++i) {
      if (count(i) != count(0)) return false;
    }
    return true;
  }

  [[nodiscard]] ValueMode mode() const noexcept { return mode_; }
  [[nodiscard]] const std::vector<std::string>& labels() const noexcept { return labels_; }
  [[nodiscard]] const std::vector<std::string>& unit_ids() const noexcept { return unit_ids_; }
  [[nodiscard]] const std::vector<std::string>& coder_labels() const noexcept { return coder_labels_; }

  /// Number of coder columns spanned by the stored scores (or declared labels).
  [[nodiscard]] std::size_t coder_columns() const {
    std::size_t cols = coder_labels_.size();
    for (const auto c : coders_) cols = std::max<std::size_t>(cols, c + 1);
    return cols;
  }

  /// Matrix made of the listed units, in the listed order (repeats allowed).
  [[nodiscard]] DataMatrix select(std::span<const std::size_t> units_to_keep) const {
    std::vector<std::vector<double>> rows;
    std::vector<std::vector<std::uint32_t>> coders;
    std::vector<std::string> ids;
    rows.reserve(units_to_keep.size());
    for (const auto i : units_to_keep) {
      if (i >= units()) throw PreconditionError("unit index out of range");
      const auto r = row(i);
      const auto c = row_coders(i);
      rows.emplace_back(r.begin(), r.end());
      coders.emplace_back(c.begin(), c.end());
      ids.push_back(unit_ids_[i]);
    }
    return DataMatrix(rows, mode_, labels_, std::move(ids), coder_labels_, coders);
  }

  /// Text of a stored score: the number, or the verbatim categorical label.
  [[nodiscard]] std::string format(std::size_t flat_index) const {
    const double v = values_[flat_index];
    if (mode_ == ValueMode::categorical && !labels_.empty()) return labels_[static_cast<std::size_t>(v)];
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

 private:
  ValueMode mode_ = ValueMode::numeric;
  std::vector<double> values_;
  std::vector<std::uint32_t> coders_;
  std::vector<std::size_t> offsets_;
  std::vector<std::string> labels_;
  std::vector<std::string> unit_ids_;
  std::vector<std::string> coder_labels_;
};

struct CsvOptions {
  std::string missing_token = "NA";
  char delimiter = ',';
  bool header = true;
  /// First column holds unit identifiers rather than scores.
  bool row_names = false;
  ValueMode mode = ValueMode::numeric;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

inline std::vector<std::string> split(const std::string& line, char delimiter) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (const char ch : line) {
    if (ch == '"') quoted = !quoted;
    if (ch == delimiter && !quoted) {
      cells.push_back(trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(trim(cell));
  return cells;
}

}  // namespace detail

/// Parses rows-as-units, columns-as-coders text. Cells equal to the missing
/// token are absent scores. Categorical labels are kept verbatim and coded in
/// order of first appearance.
inline DataMatrix parse_csv(std::istream& in, const CsvOptions& opt = {}) {
  std::vector<std::string> coder_labels;
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<std::uint32_t>> coders;
  std::vector<std::string> unit_ids;
  std::vector<std::string> labels;
  std::map<std::string, std::uint32_t> label_index;

  std::size_t width = 0;
  bool first = true;
  std::size_t line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split(line, opt.delimiter);
    if (first) {
      width = cells.size();
      first = false;
      if (opt.header) {
        coder_labels.assign(cells.begin() + (opt.row_names ? 1 : 0), cells.end());
        continue;
      }
    }
    if (cells.size() != width) {
      throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                       " cells, found " + std::to_string(cells.size()));
    }
    std::size_t start = 0;
    if (opt.row_names) {
      unit_ids.push_back(cells[0]);
      start = 1;
    }
    std::vector<double> row;
    std::vector<std::uint32_t> cols;
    for (std::size_t c = start; c < cells.size(); ++c) {
      const auto& cell = cells[c];
      if (cell == opt.missing_token || cell.empty()) continue;
      if (opt.mode == ValueMode::numeric) {
        double v = 0;
        std::size_t used = 0;
        try {
          v = std::stod(cell, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != cell.size()) {
          throw InputError("line " + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
        }
        row.push_back(v);
      } else {
        auto [it, inserted] = label_index.try_emplace(cell, static_cast<std::uint32_t>(labels.size()));
        if (inserted) labels.push_back(cell);
        row.push_back(static_cast<double>(it->second));
      }
      cols.push_back(static_cast<std::uint32_t>(c - start));
    }
    rows.push_back(std::move(row));
    coders.push_back(std::move(cols));
  }
  if (rows.empty()) throw InputError("no units");
  if (!opt.row_names) unit_ids.clear();
  return DataMatrix(rows, opt.mode, std::move(labels), std::move(unit_ids), std::move(coder_labels), coders);
}

inline DataMatrix load_csv(const std::string& path, const CsvOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read '" + path + "'");
  return parse_csv(in, opt);
}

/// Writes the matrix back as a grid, with the missing token in unobserved
/// cells. parse_csv on the output reproduces the matrix.
inline void write_csv(std::ostream& out, const DataMatrix& m, const CsvOptions& opt = {}) {
  const std::size_t cols = m.coder_columns();
  const auto sep = opt.delimiter;
  if (opt.header) {
    if (opt.row_names) out << "unit" << sep;
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << sep;
      out << (c < m.coder_labels().size() ? m.coder_labels()[c] : "c" + std::to_string(c + 1));
    }
    out << '\n';
  }
  for (std::size_t i = 0; i < m.units(); ++i) {
    std::vector<std::string> cells(cols, opt.missing_token);
    const auto coders = m.row_coders(i);
    for (std::size_t j = 0; j < coders.size(); ++j) cells[coders[j]] = m.format(m.offset(i) + j);
    if (opt.row_names) out << m.unit_ids()[i] << sep;
    for (std::size_t c = 0; c < cols; ++c) {
      if (c) out << sep;
      out << cells[c];
    }
    out << '\n';
  }
}

struct PruneResult {
  DataMatrix matrix;
  /// Indices (into the input matrix) of the removed units.
  std::vector<std::size_t> dropped;
};

/// Keeps only units with at least `min_scores` observed scores.
inline PruneResult prune_units(const DataMatrix& m, std::size_t min_scores = 2) {
  std::vector<std::size_t> keep;
  PruneResult result;
  for (std::size_t i = 0; i < m.units(); ++i) {
    (m.count(i) >= min_scores ? keep : result.dropped).push_back(i);
  }
  if (keep.empty()) throw PreconditionError("no units");
  result.matrix = m.select(keep);
  return result;
}

/// Removes one unit (0-based), e.g. for leave-unit-out sensitivity checks.
inline DataMatrix drop_unit(const DataMatrix& m, std::size_t unit) {
  if (unit >= m.units()) throw PreconditionError("unit index out of range");
  std::vector<std::size_t> keep(m.units());
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(unit));
  return m.select(keep);
}

}  // namespace kalpha
