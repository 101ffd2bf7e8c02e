#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lfl/error.hpp"

namespace lfl {

enum class LabelKind { nominal, ordinal };

inline const char* to_string(LabelKind kind) {
  return kind == LabelKind::nominal ? "nominal" : "ordinal";
}

inline LabelKind label_kind_from_string(const std::string& s) {
  if (s == "nominal") return LabelKind::nominal;
  if (s == "ordinal") return LabelKind::ordinal;
  throw ConfigError("unknown label kind '" + s + "'");
}

/// The finite label set of a dyadic task.
///
/// Labels are referred to by their position in `labels`. The base label has
/// its weights pinned to zero so every other label's score is a log-odds
/// against it. Ordinal label spaces carry strictly increasing numeric values,
/// which the mean/median prediction rules and the ordinal losses need.
class LabelSpace {
 public:
  LabelSpace() = default;

  LabelSpace(std::vector<std::string> labels, LabelKind kind,
             std::optional<std::vector<double>> numeric_values = std::nullopt,
             std::optional<std::size_t> base_index = std::nullopt)
      : labels_(std::move(labels)), kind_(kind), values_(std::move(numeric_values)) {
    if (labels_.empty()) throw ConfigError("label space must not be empty");
    base_ = base_index.value_or(labels_.size() - 1);
    validate();
  }

  /// Labels "1".."count" with numeric values 1..count.
  static LabelSpace numbered(std::size_t count, LabelKind kind,
                             std::optional<std::size_t> base_index = std::nullopt) {
    std::vector<std::string> names;
    std::vector<double> values;
    for (std::size_t i = 0; i < count; ++i) {
      names.push_back(std::to_string(i + 1));
      values.push_back(static_cast<double>(i + 1));
    }
    return LabelSpace(std::move(names), kind, std::move(values), base_index);
  }

  /// Binary {0, 1} label space with 0 as base, used by the link variants.
  static LabelSpace binary() {
    return LabelSpace({"0", "1"}, LabelKind::nominal, std::vector<double>{0.0, 1.0}, 0);
  }

  std::size_t size() const { return labels_.size(); }
  LabelKind kind() const { return kind_; }
  std::size_t base_index() const { return base_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  bool has_values() const { return values_.has_value(); }
  const std::vector<double>& values() const {
    if (!values_) throw ConfigError("label space has no numeric values");
    return *values_;
  }
  double value(std::size_t i) const { return values().at(i); }
  const std::optional<std::vector<double>>& maybe_values() const { return values_; }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = std::find(labels_.begin(), labels_.end(), name);
    if (it == labels_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - labels_.begin());
  }

  std::size_t index_of(const std::string& name) const {
    auto i = find(name);
    if (!i) throw DataError("unknown label '" + name + "'");
    return *i;
  }

  /// Index of the label carrying the given numeric value (exact match).
  std::optional<std::size_t> index_of_value(double v) const {
    if (!values_) return std::nullopt;
    for (std::size_t i = 0; i < values_->size(); ++i)
      if ((*values_)[i] == v) return i;
    return std::nullopt;
  }

  bool operator==(const LabelSpace&) const = default;

 private:
  void validate() const {
    if (base_ >= labels_.size()) throw ConfigError("base index out of range");
    for (std::size_t i = 0; i < labels_.size(); ++i)
      for (std::size_t j = i + 1; j < labels_.size(); ++j)
        if (labels_[i] == labels_[j]) throw ConfigError("duplicate label '" + labels_[i] + "'");
    if (values_ && values_->size() != labels_.size())
      throw ConfigError("numeric values must match label count");
    if (kind_ == LabelKind::ordinal) {
      if (!values_) throw ConfigError("ordinal label space requires numeric values");
      for (std::size_t i = 1; i < values_->size(); ++i)
        if (!((*values_)[i] > (*values_)[i - 1]))
          throw ConfigError("ordinal numeric values must be strictly increasing");
    }
  }

  std::vector<std::string> labels_;
  LabelKind kind_ = LabelKind::nominal;
  std::optional<std::vector<double>> values_;
  std::size_t base_ = 0;
};

}  // namespace lfl
