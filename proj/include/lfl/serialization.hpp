#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lfl/dataset.hpp"
#include "lfl/error.hpp"
#include "lfl/model.hpp"
#include "lfl/training.hpp"

namespace lfl {

using json = nlohmann::json;

inline json to_json(const LabelSpace& ls) {
  json j{{"labels", ls.labels()}, {"kind", to_string(ls.kind())}, {"base_index", ls.base_index()}};
  j["numeric_values"] = ls.has_values() ? json(ls.values()) : json(nullptr);
  return j;
}

inline LabelSpace label_space_from_json(const json& j) {
  std::optional<std::vector<double>> values;
  if (j.contains("numeric_values") && !j["numeric_values"].is_null())
    values = j["numeric_values"].get<std::vector<double>>();
  return LabelSpace(j.at("labels").get<std::vector<std::string>>(),
                    label_kind_from_string(j.at("kind").get<std::string>()), std::move(values),
                    j.at("base_index").get<std::size_t>());
}

namespace detail {

inline json matrix_json(const LflModel& m, std::size_t first, std::size_t rows, std::size_t cols) {
  json out = json::array();
  const auto w = m.parameters();
  for (std::size_t r = 0; r < rows; ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < cols; ++c) row.push_back(w[first + r * cols + c]);
    out.push_back(std::move(row));
  }
  return out;
}

inline void read_matrix(const json& j, LflModel& m, std::size_t first, std::size_t rows, std::size_t cols,
                        const char* name) {
  if (!j.is_array() || j.size() != rows) throw DataError(std::string("model block '") + name + "' has wrong shape");
  auto w = m.parameters();
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw DataError(std::string("model block '") + name + "' has wrong shape");
    for (std::size_t c = 0; c < cols; ++c) w[first + r * cols + c] = j[r][c].get<double>();
  }
}

}  // namespace detail

/// Self-describing JSON: label space, variant, shape flags, and every weight
/// block as nested row-major arrays (per-label blocks as arrays of matrices).
inline json to_json(const LflModel& m) {
  const auto& s = m.shape();
  const std::size_t k = m.factor_count();
  json j;
  j["format"] = "lfl-model";
  j["version"] = 1;
  j["variant"] = to_string(s.variant);
  j["label_space"] = to_json(s.labels);
  j["rows"] = s.rows;
  j["cols"] = s.cols;
  j["rank"] = s.rank;
  j["bias"] = s.bias;
  j["global_bias"] = s.global_bias;
  j["side_dim"] = s.side_dim;
  j["stereotype_rank"] = s.stereotype_rank;
  j["relations"] = s.relations;
  j["latent_frozen"] = m.latent_frozen();
  json blocks;
  json alpha = json::array(), beta = json::array();
  for (std::size_t set = 0; set < m.set_count(); ++set) {
    alpha.push_back(detail::matrix_json(m, m.alpha_index(set, 0), s.rows, k));
    if (s.variant != Variant::symmetric_link) beta.push_back(detail::matrix_json(m, m.beta_index(set, 0), s.cols, k));
  }
  blocks["alpha"] = std::move(alpha);
  if (s.variant != Variant::symmetric_link) blocks["beta"] = std::move(beta);
  if (s.variant == Variant::directed_link) {
    json gamma = json::array();
    for (std::size_t y = 0; y < m.label_count(); ++y)
      gamma.push_back(detail::matrix_json(m, m.gamma_index(y, 0), s.rows, s.rank));
    blocks["gamma"] = std::move(gamma);
  }
  if (s.variant == Variant::multi_relational) blocks["lambda"] = detail::matrix_json(m, m.lambda_index(0), s.relations, k);
  if (s.variant == Variant::stereotype)
    blocks["phi"] = detail::matrix_json(m, m.phi_index(0, 0), s.stereotype_rank, m.label_count());
  if (s.side_dim > 0) blocks["side"] = detail::matrix_json(m, m.side_index(0), m.label_count(), s.side_dim);
  if (s.global_bias) blocks["offset"] = detail::matrix_json(m, m.offset_index(0), 1, m.label_count())[0];
  j["blocks"] = std::move(blocks);
  return j;
}

namespace detail {

inline LflModel parse_model(const json& j) {
  if (j.value("format", "") != "lfl-model") throw DataError("not an lfl-model document");
  ModelShape s;
  s.labels = label_space_from_json(j.at("label_space"));
  s.variant = variant_from_string(j.at("variant").get<std::string>());
  s.rows = j.at("rows").get<std::size_t>();
  s.cols = j.at("cols").get<std::size_t>();
  s.rank = j.at("rank").get<std::size_t>();
  s.bias = j.at("bias").get<bool>();
  s.global_bias = j.at("global_bias").get<bool>();
  s.side_dim = j.at("side_dim").get<std::size_t>();
  s.stereotype_rank = j.at("stereotype_rank").get<std::size_t>();
  s.relations = j.at("relations").get<std::size_t>();
  LflModel m(s);
  const auto& b = j.at("blocks");
  const std::size_t k = m.factor_count();
  const auto& alpha = b.at("alpha");
  if (alpha.size() != m.set_count()) throw DataError("model block 'alpha' has wrong set count");
  for (std::size_t set = 0; set < m.set_count(); ++set) {
    detail::read_matrix(alpha[set], m, m.alpha_index(set, 0), s.rows, k, "alpha");
    if (s.variant != Variant::symmetric_link) {
      const auto& beta = b.at("beta");
      if (beta.size() != m.set_count()) throw DataError("model block 'beta' has wrong set count");
      detail::read_matrix(beta[set], m, m.beta_index(set, 0), s.cols, k, "beta");
    }
  }
  if (s.variant == Variant::directed_link)
    for (std::size_t y = 0; y < m.label_count(); ++y)
      detail::read_matrix(b.at("gamma").at(y), m, m.gamma_index(y, 0), s.rows, s.rank, "gamma");
  if (s.variant == Variant::multi_relational)
    detail::read_matrix(b.at("lambda"), m, m.lambda_index(0), s.relations, k, "lambda");
  if (s.variant == Variant::stereotype)
    detail::read_matrix(b.at("phi"), m, m.phi_index(0, 0), s.stereotype_rank, m.label_count(), "phi");
  if (s.side_dim > 0) detail::read_matrix(b.at("side"), m, m.side_index(0), m.label_count(), s.side_dim, "side");
  if (s.global_bias) detail::read_matrix(json::array({b.at("offset")}), m, m.offset_index(0), 1, m.label_count(), "offset");
  // Frozen constants are part of the document; a mismatch means it was edited.
  const auto before = std::vector<double>(m.parameters().begin(), m.parameters().end());
  m.reset_constants();
  if (!std::equal(before.begin(), before.end(), m.parameters().begin()))
    throw DataError("model document violates frozen constants (base label zeros or bias ones)");
  m.set_latent_frozen(j.value("latent_frozen", false));
  return m;
}

}  // namespace detail

inline LflModel model_from_json(const json& j) {
  try {
    return detail::parse_model(j);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

/// A model plus what the CLI needs to score new id strings: the id maps it was
/// trained with and, for ordinal tasks, the cold-start fallback tables.
struct ModelFile {
  LflModel model;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  bool shared_ids = false;
  bool relation_column = false;
  std::optional<ColdStartFallback> fallback;
};

inline json to_json(const ModelFile& f) {
  json j = to_json(f.model);
  j["row_ids"] = f.row_ids;
  j["col_ids"] = f.col_ids;
  j["shared_ids"] = f.shared_ids;
  j["relation_column"] = f.relation_column;
  if (f.fallback) {
    const auto& fb = *f.fallback;
    j["fallback"] = {{"row_sums", fb.row_sums()},   {"row_counts", fb.row_counts()},
                     {"col_sums", fb.col_sums()},   {"col_counts", fb.col_counts()},
                     {"global_sum", fb.global_sum()}, {"global_count", fb.global_count()}};
  }
  return j;
}

inline ModelFile model_file_from_json(const json& j) {
  ModelFile f;
  f.model = model_from_json(j);
  try {
    f.row_ids = j.value("row_ids", std::vector<std::string>{});
    f.col_ids = j.value("col_ids", std::vector<std::string>{});
    f.shared_ids = j.value("shared_ids", false);
    f.relation_column = j.value("relation_column", false);
    if (j.contains("fallback")) {
      const auto& fb = j["fallback"];
      f.fallback = ColdStartFallback::from_tables(
          fb.at("row_sums").get<std::vector<double>>(), fb.at("row_counts").get<std::vector<std::size_t>>(),
          fb.at("col_sums").get<std::vector<double>>(), fb.at("col_counts").get<std::vector<std::size_t>>(),
          fb.at("global_sum").get<double>(), fb.at("global_count").get<std::size_t>());
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
  return f;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(1) << '\n';
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void save_model(const std::string& path, const LflModel& m) { write_json_file(path, to_json(m)); }
inline LflModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

}  // namespace lfl
