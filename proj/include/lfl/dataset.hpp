#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lfl/error.hpp"
#include "lfl/label_space.hpp"
#include "lfl/model.hpp"

namespace lfl {

/// Dense interning of string ids in first-appearance order.
class IdMap {
 public:
  std::size_t intern(const std::string& id) {
    auto [it, inserted] = index_.try_emplace(id, names_.size());
    if (inserted) names_.push_back(id);
    return it->second;
  }
  std::optional<std::size_t> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  static IdMap from_names(const std::vector<std::string>& names) {
    IdMap m;
    for (const auto& n : names) m.intern(n);
    return m;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Example {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t label = 0;
  std::size_t relation = 0;

  bool operator==(const Example&) const = default;
};

/// Observed (row, column, label) triples plus optional per-example side vectors.
struct DyadDataset {
  LabelSpace labels;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t relations = 1;
  std::vector<Example> examples;
  std::size_t side_dim = 0;
  std::vector<double> side;  // examples.size() x side_dim, row-major
  IdMap row_ids;
  IdMap col_ids;
  bool shared_ids = false;       // rows and columns index the same object set (link tasks)
  bool relation_column = false;  // triplet files carry a relation field before the label
  std::vector<std::size_t> row_counts;
  std::vector<std::size_t> col_counts;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  bool has_side() const { return side_dim > 0; }

  std::span<const double> side_of(std::size_t i) const {
    if (side_dim == 0) return {};
    return {side.data() + i * side_dim, side_dim};
  }

  /// The i-th example as a dyad for a model with `model_side_dim` side inputs.
  Dyad dyad(std::size_t i, std::size_t model_side_dim) const {
    const auto& e = examples[i];
    return Dyad{e.row, e.col, model_side_dim ? side_of(i) : std::span<const double>{}, e.relation};
  }
  Dyad dyad(std::size_t i) const { return dyad(i, side_dim); }

  void recount() {
    row_counts.assign(rows, 0);
    col_counts.assign(cols, 0);
    for (const auto& e : examples) {
      ++row_counts[e.row];
      ++col_counts[e.col];
    }
  }

  /// Appearances of an object as row or column; for shared ids the sum of both.
  std::size_t object_count(bool is_row, std::size_t index) const {
    if (shared_ids) return row_counts[index] + col_counts[index];
    return is_row ? row_counts[index] : col_counts[index];
  }

  void validate() const {
    if (shared_ids && rows != cols) throw DataError("shared-id dataset needs rows == cols");
    if (side.size() != examples.size() * side_dim) throw DataError("side storage size mismatch");
    for (const auto& e : examples) {
      if (e.row >= rows || e.col >= cols) throw DataError("example id out of bounds");
      if (e.label >= labels.size()) throw DataError("example label out of bounds");
      if (e.relation >= relations) throw DataError("example relation out of bounds");
    }
    std::vector<std::size_t> rc(rows, 0), cc(cols, 0);
    for (const auto& e : examples) {
      ++rc[e.row];
      ++cc[e.col];
    }
    if (rc != row_counts || cc != col_counts) throw DataError("observation counts out of date");
  }

  /// Copy with the same ids, labels and dimensions but no examples.
  DyadDataset empty_like() const {
    DyadDataset d;
    d.labels = labels;
    d.rows = rows;
    d.cols = cols;
    d.relations = relations;
    d.side_dim = side_dim;
    d.row_ids = row_ids;
    d.col_ids = col_ids;
    d.shared_ids = shared_ids;
    d.relation_column = relation_column;
    d.row_counts.assign(rows, 0);
    d.col_counts.assign(cols, 0);
    return d;
  }

  void push(const Example& e, std::span<const double> s = {}) {
    examples.push_back(e);
    side.insert(side.end(), s.begin(), s.end());
  }

  /// Subset by example indices, in the given order.
  DyadDataset subset(std::span<const std::size_t> idx) const {
    DyadDataset d = empty_like();
    d.examples.reserve(idx.size());
    for (std::size_t i : idx) d.push(examples[i], side_of(i));
    d.recount();
    return d;
  }
};

// ---------------------------------------------------------------------------
// Triplet files

struct LoadOptions {
  std::optional<std::vector<std::string>> declared_labels;  // else inferred sorted-unique
  LabelKind kind = LabelKind::nominal;
  std::optional<std::string> base_label;   // defaults to the last label
  bool relation_column = false;            // row, col, relation, label
  bool shared_ids = false;                 // link tasks: one id namespace
  std::optional<LabelSpace> label_space;   // reuse an existing label space verbatim
  const IdMap* row_ids = nullptr;          // extend these instead of starting fresh
  const IdMap* col_ids = nullptr;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_fields(const std::string& line) {
  const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

inline std::optional<std::size_t> parse_index(const std::string& s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Label space from raw label strings: numeric labels sort numerically and
/// carry their values, anything else sorts lexicographically.
inline LabelSpace infer_labels(const std::set<std::string>& raw, LabelKind kind,
                               const std::optional<std::string>& base) {
  std::vector<std::string> names(raw.begin(), raw.end());
  std::optional<std::vector<double>> values;
  bool numeric = true;
  for (const auto& n : names) numeric = numeric && parse_double(n).has_value();
  if (numeric) {
    std::sort(names.begin(), names.end(),
              [](const std::string& a, const std::string& b) { return *parse_double(a) < *parse_double(b); });
    values.emplace();
    for (const auto& n : names) values->push_back(*parse_double(n));
  }
  std::optional<std::size_t> base_index;
  if (base) {
    auto it = std::find(names.begin(), names.end(), *base);
    if (it == names.end()) throw ConfigError("base label '" + *base + "' not among labels");
    base_index = static_cast<std::size_t>(it - names.begin());
  }
  return LabelSpace(std::move(names), kind, std::move(values), base_index);
}

inline LabelSpace declared_space(const std::vector<std::string>& names, LabelKind kind,
                                 const std::optional<std::string>& base) {
  std::optional<std::vector<double>> values;
  bool numeric = true;
  for (const auto& n : names) numeric = numeric && parse_double(n).has_value();
  if (numeric) {
    values.emplace();
    for (const auto& n : names) values->push_back(*parse_double(n));
  }
  std::optional<std::size_t> base_index;
  if (base) {
    auto it = std::find(names.begin(), names.end(), *base);
    if (it == names.end()) throw ConfigError("base label '" + *base + "' not among labels");
    base_index = static_cast<std::size_t>(it - names.begin());
  }
  return LabelSpace(names, kind, std::move(values), base_index);
}

}  // namespace detail

/// Parses `row, col, label[, side...]` lines (tab or comma separated, `#` comments).
inline DyadDataset load_triplets_from_stream(std::istream& in, const LoadOptions& opt = {},
                                             const std::string& source = "<stream>") {
  struct Raw {
    std::string row, col, label;
    std::size_t relation;
    std::vector<double> side;
  };
  std::vector<Raw> raw;
  std::set<std::string> label_set;
  std::optional<std::size_t> side_dim;
  std::string line;
  std::size_t line_no = 0;
  const std::size_t label_field = opt.relation_column ? 3 : 2;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto f = detail::split_fields(t);
    if (f.size() < label_field + 1)
      throw DataError(source + ":" + std::to_string(line_no) + ": expected at least " +
                      std::to_string(label_field + 1) + " fields");
    Raw r{f[0], f[1], f[label_field], 0, {}};
    if (opt.relation_column) {
      auto rel = detail::parse_index(f[2]);
      if (!rel) throw DataError(source + ":" + std::to_string(line_no) + ": bad relation index '" + f[2] + "'");
      r.relation = *rel;
    }
    for (std::size_t j = label_field + 1; j < f.size(); ++j) {
      auto v = detail::parse_double(f[j]);
      if (!v) throw DataError(source + ":" + std::to_string(line_no) + ": bad side value '" + f[j] + "'");
      r.side.push_back(*v);
    }
    if (!side_dim) side_dim = r.side.size();
    else if (*side_dim != r.side.size())
      throw DataError(source + ":" + std::to_string(line_no) + ": inconsistent side dimension");
    if (r.row.empty() || r.col.empty() || r.label.empty())
      throw DataError(source + ":" + std::to_string(line_no) + ": empty field");
    label_set.insert(r.label);
    raw.push_back(std::move(r));
  }
  if (raw.empty()) throw DataError("empty dataset");

  DyadDataset d;
  if (opt.label_space) d.labels = *opt.label_space;
  else if (opt.declared_labels) d.labels = detail::declared_space(*opt.declared_labels, opt.kind, opt.base_label);
  else d.labels = detail::infer_labels(label_set, opt.kind, opt.base_label);

  d.shared_ids = opt.shared_ids;
  d.relation_column = opt.relation_column;
  if (opt.row_ids) d.row_ids = *opt.row_ids;
  if (opt.col_ids && !opt.shared_ids) d.col_ids = *opt.col_ids;
  d.side_dim = side_dim.value_or(0);
  std::size_t max_rel = 0;
  for (const auto& r : raw) {
    auto label = d.labels.find(r.label);
    if (!label) throw DataError(source + ": unknown label '" + r.label + "'");
    Example e;
    e.row = d.row_ids.intern(r.row);
    e.col = opt.shared_ids ? d.row_ids.intern(r.col) : d.col_ids.intern(r.col);
    e.label = *label;
    e.relation = r.relation;
    max_rel = std::max(max_rel, r.relation);
    d.push(e, r.side);
  }
  if (opt.shared_ids) d.col_ids = d.row_ids;
  d.rows = d.row_ids.size();
  d.cols = d.col_ids.size();
  d.relations = max_rel + 1;
  d.recount();
  return d;
}

inline DyadDataset load_triplets(const std::string& path, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_triplets_from_stream(in, opt, path);
}

inline void write_triplets(std::ostream& out, const DyadDataset& d) {
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& e = d.examples[i];
    out << d.row_ids.name(e.row) << '\t' << d.col_ids.name(e.col) << '\t';
    if (d.relation_column) out << e.relation << '\t';
    out << d.labels.label(e.label);
    for (double v : d.side_of(i)) out << '\t' << detail::format_double(v);
    out << '\n';
  }
}

inline void save_triplets(const std::string& path, const DyadDataset& d) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_triplets(out, d);
}

// ---------------------------------------------------------------------------
// Per-object side-information tables

/// Feature rows for row objects and column objects, read from a file with a
/// `ROW` section and a `COL` section of `object_id, f1, f2, ...` lines.
struct SideTable {
  std::size_t row_dim = 0;
  std::size_t col_dim = 0;
  std::map<std::string, std::vector<double>> row_features;
  std::map<std::string, std::vector<double>> col_features;
  std::vector<std::string> row_order;  // file order, for deterministic interning
  std::vector<std::string> col_order;

  std::size_t dim() const { return row_dim + col_dim; }

  void add(bool is_row, const std::string& id, std::vector<double> f) {
    auto& dim = is_row ? row_dim : col_dim;
    auto& table = is_row ? row_features : col_features;
    auto& order = is_row ? row_order : col_order;
    if (order.empty()) dim = f.size();
    else if (f.size() != dim) throw DataError("inconsistent side feature dimension for '" + id + "'");
    if (!table.emplace(id, std::move(f)).second) throw DataError("duplicate side features for '" + id + "'");
    order.push_back(id);
  }
};

inline SideTable load_side_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  SideTable t;
  std::optional<bool> section;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#') continue;
    if (s == "ROW") { section = true; continue; }
    if (s == "COL") { section = false; continue; }
    if (!section) throw DataError(path + ":" + std::to_string(line_no) + ": feature line before ROW/COL header");
    auto f = detail::split_fields(s);
    std::vector<double> feats;
    for (std::size_t j = 1; j < f.size(); ++j) {
      auto v = detail::parse_double(f[j]);
      if (!v) throw DataError(path + ":" + std::to_string(line_no) + ": bad feature value '" + f[j] + "'");
      feats.push_back(*v);
    }
    t.add(*section, f[0], std::move(feats));
  }
  return t;
}

inline void save_side_table(const std::string& path, const SideTable& t) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  auto section = [&](const char* header, const std::vector<std::string>& order,
                     const std::map<std::string, std::vector<double>>& table) {
    out << header << '\n';
    for (const auto& id : order) {
      out << id;
      for (double v : table.at(id)) out << '\t' << detail::format_double(v);
      out << '\n';
    }
  };
  section("ROW", t.row_order, t.row_features);
  section("COL", t.col_order, t.col_features);
}

/// Replaces each example's side vector with [row features, column features].
/// Objects present in the table but not in the dataset are interned as well, so
/// a model sized from the result has rows for objects never seen in training.
inline void attach_side(DyadDataset& d, const SideTable& t) {
  if (d.shared_ids) throw DataError("per-object side tables are not supported for link datasets");
  for (const auto& id : t.row_order) d.row_ids.intern(id);
  for (const auto& id : t.col_order) d.col_ids.intern(id);
  d.rows = d.row_ids.size();
  d.cols = d.col_ids.size();
  d.side_dim = t.dim();
  d.side.assign(d.examples.size() * d.side_dim, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& e = d.examples[i];
    auto rf = t.row_features.find(d.row_ids.name(e.row));
    auto cf = t.col_features.find(d.col_ids.name(e.col));
    if (rf == t.row_features.end()) throw DataError("no side features for row '" + d.row_ids.name(e.row) + "'");
    if (cf == t.col_features.end()) throw DataError("no side features for column '" + d.col_ids.name(e.col) + "'");
    std::copy(rf->second.begin(), rf->second.end(), d.side.begin() + i * d.side_dim);
    std::copy(cf->second.begin(), cf->second.end(), d.side.begin() + i * d.side_dim + t.row_dim);
  }
  d.recount();
}

/// Side vector for an arbitrary (row id, column id) pair.
inline std::vector<double> side_vector(const SideTable& t, const std::string& row, const std::string& col) {
  auto rf = t.row_features.find(row);
  auto cf = t.col_features.find(col);
  if (rf == t.row_features.end()) throw DataError("no side features for row '" + row + "'");
  if (cf == t.col_features.end()) throw DataError("no side features for column '" + col + "'");
  std::vector<double> s(rf->second);
  s.insert(s.end(), cf->second.begin(), cf->second.end());
  return s;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitScheme {
  enum class Kind { random_fraction, per_row_holdout, coldstart_rows };
  Kind kind = Kind::random_fraction;
  double test_fraction = 0.2;                 // random_fraction
  std::size_t holdout_per_row = 1;            // per_row_holdout
  std::size_t holdout_rows = 0;               // per_row_holdout: rows to select (0 = all eligible)
  std::vector<std::size_t> coldstart;         // coldstart_rows

  static SplitScheme random_fraction(double f) {
    SplitScheme s;
    s.kind = Kind::random_fraction;
    s.test_fraction = f;
    return s;
  }
  static SplitScheme per_row(std::size_t m, std::size_t rows = 0) {
    SplitScheme s;
    s.kind = Kind::per_row_holdout;
    s.holdout_per_row = m;
    s.holdout_rows = rows;
    return s;
  }
  static SplitScheme coldstart_rows(std::vector<std::size_t> rows) {
    SplitScheme s;
    s.kind = Kind::coldstart_rows;
    s.coldstart = std::move(rows);
    return s;
  }
};

struct TrainTest {
  DyadDataset train;
  DyadDataset test;
};

/// Disjoint, exhaustive, seeded partition of a dataset's examples.
inline TrainTest split(const DyadDataset& d, const SplitScheme& scheme, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<char> in_test(d.size(), 0);
  switch (scheme.kind) {
    case SplitScheme::Kind::random_fraction: {
      if (!(scheme.test_fraction >= 0.0 && scheme.test_fraction <= 1.0))
        throw ConfigError("test fraction must lie in [0, 1]");
      std::vector<std::size_t> order(d.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::shuffle(order.begin(), order.end(), rng);
      const auto n_test = static_cast<std::size_t>(std::llround(scheme.test_fraction * static_cast<double>(d.size())));
      for (std::size_t i = 0; i < n_test; ++i) in_test[order[i]] = 1;
      break;
    }
    case SplitScheme::Kind::per_row_holdout: {
      std::vector<std::vector<std::size_t>> by_row(d.rows);
      for (std::size_t i = 0; i < d.size(); ++i) by_row[d.examples[i].row].push_back(i);
      std::vector<std::size_t> eligible;
      for (std::size_t r = 0; r < d.rows; ++r)
        if (by_row[r].size() > scheme.holdout_per_row) eligible.push_back(r);
      const std::size_t want = scheme.holdout_rows ? scheme.holdout_rows : eligible.size();
      if (want > eligible.size() || eligible.empty())
        throw ConfigError("per-row holdout infeasible: " + std::to_string(eligible.size()) +
                          " rows have more than " + std::to_string(scheme.holdout_per_row) + " examples");
      std::shuffle(eligible.begin(), eligible.end(), rng);
      eligible.resize(want);
      std::sort(eligible.begin(), eligible.end());
      for (std::size_t r : eligible) {
        auto idx = by_row[r];
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t j = 0; j < scheme.holdout_per_row; ++j) in_test[idx[j]] = 1;
      }
      break;
    }
    case SplitScheme::Kind::coldstart_rows: {
      std::vector<char> cold(d.rows, 0);
      for (std::size_t r : scheme.coldstart) {
        if (r >= d.rows) throw ConfigError("cold-start row out of range");
        cold[r] = 1;
      }
      for (std::size_t i = 0; i < d.size(); ++i) in_test[i] = cold[d.examples[i].row];
      break;
    }
  }
  std::vector<std::size_t> tr, te;
  for (std::size_t i = 0; i < d.size(); ++i) (in_test[i] ? te : tr).push_back(i);
  return {d.subset(tr), d.subset(te)};
}

/// Picks round(fraction * rows) distinct rows uniformly at random, sorted.
inline std::vector<std::size_t> pick_rows(std::size_t rows, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> all(rows);
  for (std::size_t i = 0; i < rows; ++i) all[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(std::llround(fraction * static_cast<double>(rows))));
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace lfl
