// lfl: train, apply and evaluate latent feature log-linear models.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lfl/lfl.hpp"

namespace fs = std::filesystem;
using namespace lfl;

namespace {

constexpr int kCheckFailed = 1;

// ---------------------------------------------------------------------------
// Small helpers

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    auto v = detail::parse_double(item);
    if (!v) throw ConfigError(std::string("bad number '") + item + "' in " + what);
    out.push_back(*v);
  }
  return out;
}

std::string to_arg(const std::string& v) { return v; }
// Shortest text that reads back to the same double.
std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string to_arg(double v) { return shortest(v); }
std::string to_arg(std::size_t v) { return std::to_string(v); }

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

std::ofstream open_out(const std::string& path) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Resolved flags: every registered option is echoed back after defaulting, so
// a manifest can replay the run.

class Resolved {
 public:
  template <class T>
  CLI::Option* option(CLI::App* app, const std::string& name, T& var, const std::string& help) {
    emit_.push_back([name, &var](std::vector<std::string>& argv, json& cfg) {
      if constexpr (std::is_same_v<T, std::string>) {
        cfg[name] = var;
        if (var.empty()) return;
      } else {
        cfg[name] = var;
      }
      argv.push_back("--" + name);
      argv.push_back(to_arg(var));
    });
    return app->add_option("--" + name, var, help)->capture_default_str();
  }

  CLI::Option* flag(CLI::App* app, const std::string& name, bool& var, const std::string& help,
                    const std::string& negation = "") {
    emit_.push_back([name, negation, &var](std::vector<std::string>& argv, json& cfg) {
      cfg[name] = var;
      if (var) argv.push_back("--" + name);
      else if (!negation.empty()) argv.push_back("--" + negation);
    });
    const std::string spec = negation.empty() ? "--" + name : "--" + name + ",!--" + negation;
    return app->add_flag(spec, var, help);
  }

  void emit(std::vector<std::string>& argv, json& cfg) const {
    for (const auto& e : emit_) e(argv, cfg);
  }

 private:
  std::vector<std::function<void(std::vector<std::string>&, json&)>> emit_;
};

struct Manifest {
  explicit Manifest(std::string cmd) : command(std::move(cmd)) {}

  std::string command;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  json seeds = json::object();
  json extra = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  json to_json(const Resolved& r) const {
    std::vector<std::string> argv{command};
    json cfg = json::object();
    r.emit(argv, cfg);
    json in = json::array();
    for (const auto& p : inputs) in.push_back({{"path", p}, {"sha256", sha256_file(p)}});
    json j{{"format", "lfl-manifest"}, {"version", 1}, {"command", command}, {"argv", argv},
           {"config", cfg},          {"seeds", seeds}, {"inputs", in},        {"outputs", outputs}};
    j["threads"] = worker_count();
    j["timing"] = {{"wall_seconds",
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    return j;
  }
};

// ---------------------------------------------------------------------------
// Model and training flags shared by train, cv and check-grad

struct ModelFlags {
  std::string task = "dyadic";
  std::size_t rank = 5;
  bool bias = true;
  bool global_bias = false;
  std::size_t stereotype_rank = 2;
  std::string labels;
  std::string kind = "nominal";
  std::string base;
  std::string side;
  CLI::Option* bias_opt = nullptr;

  void add(Resolved& r, CLI::App* app) {
    r.option(app, "task", task, "dyadic|link-sym|link-dir|multirel|stereotype")
        ->check(CLI::IsMember({"dyadic", "link-sym", "link-dir", "multirel", "stereotype"}));
    r.option(app, "rank", rank, "free latent factors k");
    bias_opt = r.flag(app, "bias", bias, "row/column bias factors (default on; off for link-sym)", "no-bias");
    r.flag(app, "global-bias", global_bias, "per-label offset");
    r.option(app, "stereotype-rank", stereotype_rank, "shared base weight pairs (stereotype task)");
    r.option(app, "labels", labels, "declared label list, comma separated (default: inferred)");
    r.option(app, "kind", kind, "nominal|ordinal")->check(CLI::IsMember({"nominal", "ordinal"}));
    r.option(app, "base", base, "base label (default: last; '0' for link tasks)");
    r.option(app, "side", side, "per-object side feature table");
  }

  Variant variant() const { return variant_from_string(task); }

  // Call after parsing.
  void resolve() {
    if (variant() == Variant::symmetric_link && bias) {
      if (bias_opt->count() > 0)
        throw ConfigError("--bias conflicts with --task link-sym: the shared weight matrix has no bias columns");
      bias = false;
    }
    if (is_link_variant(variant())) {
      if (labels.empty()) labels = "0,1";
      if (base.empty()) base = "0";
    }
  }

  LoadOptions load_options() const {
    LoadOptions o;
    if (!labels.empty()) o.declared_labels = split_list(labels);
    o.kind = label_kind_from_string(kind);
    if (!base.empty()) o.base_label = base;
    o.relation_column = variant() == Variant::multi_relational;
    o.shared_ids = is_link_variant(variant());
    return o;
  }

  DyadDataset load(const std::string& path) const {
    DyadDataset d = load_triplets(path, load_options());
    if (!side.empty()) attach_side(d, load_side_table(side));
    return d;
  }

  ModelShape shape(const DyadDataset& d) const {
    ModelShape s;
    s.labels = d.labels;
    s.variant = variant();
    s.rows = d.rows;
    s.cols = d.cols;
    s.rank = rank;
    s.bias = bias;
    s.global_bias = global_bias;
    s.side_dim = d.side_dim;
    s.stereotype_rank = s.variant == Variant::stereotype ? stereotype_rank : 0;
    s.relations = s.variant == Variant::multi_relational ? d.relations : 1;
    s.validate();
    return s;
  }
};

struct FitFlags {
  std::string objective = "nll";
  std::string optimizer = "sgd";
  std::size_t epochs = 50;
  double lr = 0.05;
  double lr_decay = 0.95;
  double l2 = 0.1;
  double l2_side = -1.0;  // negative: same as --l2
  bool scale_reg = false;
  double init_scale = 0.1;
  std::size_t seed = 0;
  std::size_t max_iters = 500;
  double tol = 1e-9;

  void add(Resolved& r, CLI::App* app) {
    r.option(app, "objective", objective, "nll|mae|mse")->check(CLI::IsMember({"nll", "mae", "mse"}));
    r.option(app, "optimizer", optimizer, "sgd|batch")->check(CLI::IsMember({"sgd", "batch"}));
    r.option(app, "epochs", epochs, "SGD epochs");
    r.option(app, "lr", lr, "SGD initial learning rate");
    r.option(app, "lr-decay", lr_decay, "SGD per-epoch learning-rate factor");
    r.option(app, "l2", l2, "penalty on latent weights");
    r.option(app, "l2-side", l2_side, "penalty on side weights (negative: same as --l2)");
    r.flag(app, "scale-reg", scale_reg, "scale each object's penalty by 1/sqrt(its count)");
    r.option(app, "init-scale", init_scale, "initial weights uniform on [-s, s]");
    r.option(app, "seed", seed, "initialization and shuffle seed");
    r.option(app, "max-iters", max_iters, "batch optimizer iteration cap");
    r.option(app, "tol", tol, "batch optimizer relative-decrease tolerance");
  }

  void resolve() {
    if (l2_side < 0) l2_side = l2;
  }

  std::uint64_t shuffle_seed() const { return static_cast<std::uint64_t>(seed) ^ 0x9E3779B97F4A7C15ULL; }

  TrainConfig config() const {
    TrainConfig c;
    c.objective = Objective{loss_from_string(objective), l2, l2_side, scale_reg};
    c.optimizer = optimizer_from_string(optimizer);
    c.epochs = epochs;
    c.learning_rate = lr;
    c.lr_decay = lr_decay;
    c.init_seed = seed;
    c.shuffle_seed = shuffle_seed();
    c.init_scale = init_scale;
    c.max_batch_iters = max_iters;
    c.convergence_tol = tol;
    c.threads = worker_count();
    c.validate();
    return c;
  }

  json seeds() const { return {{"init", seed}, {"shuffle", shuffle_seed()}}; }
};

void check_objective_labels(const FitFlags& f, const DyadDataset& d) {
  if (f.objective != "nll" && d.labels.kind() != LabelKind::ordinal)
    throw ConfigError("--objective " + f.objective + " needs ordinal labels (--kind ordinal), but the labels are " +
                      to_string(d.labels.kind()));
  if (f.objective != "nll" && !d.labels.has_values())
    throw ConfigError("--objective " + f.objective + " needs numeric label values");
}

struct Trained {
  LflModel model;
  std::vector<FitReport> reports;  // one per stage
};

Trained train(const ModelFlags& mf, const FitFlags& ff, bool coldstart, const DyadDataset& d,
              const EpochCallback& cb = {}) {
  check_objective_labels(ff, d);
  const ModelShape shape = mf.shape(d);
  const TrainConfig cfg = ff.config();
  if (coldstart) {
    if (!d.has_side()) throw ConfigError("--coldstart needs --side");
    auto r = fit_coldstart(shape, d, cfg, cb);
    return {std::move(r.model), {std::move(r.stage1), std::move(r.stage2)}};
  }
  Trained t{init_model(shape, cfg), {}};
  t.reports.push_back(fit(t.model, d, cfg, cb));
  return t;
}

json report_json(const FitReport& r) {
  return {{"initial_objective", r.trace.front()}, {"final_objective", r.final_objective},
          {"epochs_run", r.epochs_run},           {"converged", r.converged},
          {"message", r.message},                 {"wall_seconds", r.wall_seconds},
          {"trace", r.trace}};
}

void print_report(std::ostream& out, const FitReport& r, const std::string& title) {
  out << title << '\n'
      << "  initial objective  " << detail::format_double(r.trace.front()) << '\n'
      << "  final objective    " << detail::format_double(r.final_objective) << '\n'
      << "  epochs/iterations  " << r.epochs_run << '\n'
      << "  converged          " << (r.converged ? "yes" : "no") << " (" << r.message << ")\n"
      << "  wall seconds       " << std::fixed << std::setprecision(3) << r.wall_seconds << '\n';
  out.unsetf(std::ios::fixed);
}

// ---------------------------------------------------------------------------
// Predictions

struct ScoredDyad {
  std::string row, col;
  std::size_t relation = 0;
  std::string prediction;      // label name (mode/median) or value (mean)
  std::vector<double> probs;   // empty when the fallback answered
  bool fallback = false;
};

/// Scores (row id, col id) pairs with a model file: the model where both ids
/// were seen in training, the cold-start fallback otherwise (ordinal tasks).
class Scorer {
 public:
  Scorer(const ModelFile& f, PredictionRule rule) : f_(f), rule_(rule) {
    rows_ = IdMap::from_names(f.row_ids);
    cols_ = IdMap::from_names(f.shared_ids ? f.row_ids : f.col_ids);
    apply_rule(f.model.labels(), std::vector<double>(f.model.label_count(), 1.0 / double(f.model.label_count())),
               rule);  // rejects rules the label space cannot support
  }

  ScoredDyad score(const std::string& row, const std::string& col, std::size_t relation,
                   std::span<const double> side) const {
    const auto& m = f_.model;
    ScoredDyad s{row, col, relation, {}, {}, false};
    const auto r = rows_.find(row), c = cols_.find(col);
    const bool ordinal = m.labels().kind() == LabelKind::ordinal && f_.fallback.has_value();
    const bool use_fallback = ordinal && !m.has_side() &&
                              (!r || !c || !f_.fallback->row_seen(*r) || !f_.fallback->col_seen(*c));
    if (use_fallback) {
      constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
      const double v = f_.fallback->predict(m, Dyad{r.value_or(none), c.value_or(none), {}, relation});
      s.fallback = true;
      s.prediction = rule_ == PredictionRule::mean ? detail::format_double(v) : m.labels().label(nearest_label(v));
      return s;
    }
    if (!r) throw DataError("unknown row id '" + row + "'" + unseen_hint());
    if (!c) throw DataError("unknown column id '" + col + "'" + unseen_hint());
    const Dyad d{*r, *c, side, relation};
    s.probs = predict_proba(m, d).probs;
    const auto p = apply_rule(m.labels(), s.probs, rule_);
    s.prediction = p.label ? m.labels().label(*p.label) : detail::format_double(p.value);
    return s;
  }

 private:
  std::size_t nearest_label(double v) const {
    const auto& vals = f_.model.labels().values();
    std::size_t best = 0;
    for (std::size_t y = 1; y < vals.size(); ++y)
      if (std::abs(vals[y] - v) < std::abs(vals[best] - v)) best = y;
    return best;
  }
  std::string unseen_hint() const {
    if (f_.model.has_side()) return " (side-information models need the id in the side table at training time)";
    return f_.model.labels().kind() == LabelKind::ordinal ? "" : " (cold-start fallback needs an ordinal task)";
  }

  const ModelFile& f_;
  PredictionRule rule_;
  IdMap rows_, cols_;
};

PredictionRule default_rule(const LabelSpace& labels) {
  return labels.kind() == LabelKind::ordinal ? PredictionRule::mean : PredictionRule::mode;
}

std::size_t positive_index(const LabelSpace& labels) { return labels.base_index() == 0 ? 1 : 0; }

struct PredictionsHeader {
  PredictionRule rule = PredictionRule::mode;
  LabelSpace labels;
  bool relation = false;
};

void write_predictions(std::ostream& out, const PredictionsHeader& h, const std::vector<ScoredDyad>& rows) {
  out << "#lfl-predictions\trule=" << to_string(h.rule) << "\tkind=" << to_string(h.labels.kind())
      << "\tbase=" << h.labels.label(h.labels.base_index()) << "\trelation=" << (h.relation ? 1 : 0) << "\tlabels=";
  for (std::size_t y = 0; y < h.labels.size(); ++y) out << (y ? "," : "") << h.labels.label(y);
  out << '\n';
  for (const auto& s : rows) {
    out << s.row << '\t' << s.col << '\t';
    if (h.relation) out << s.relation << '\t';
    out << s.prediction;
    for (std::size_t y = 0; y < h.labels.size(); ++y)
      out << '\t' << (s.fallback ? std::string("nan") : detail::format_double(s.probs[y]));
    out << '\t' << (s.fallback ? "fallback" : "model") << '\n';
  }
}

std::pair<PredictionsHeader, std::vector<ScoredDyad>> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("#lfl-predictions", 0) != 0)
    throw DataError(path + ": not an lfl predictions file");
  std::map<std::string, std::string> kv;
  std::stringstream hs(line);
  std::string field;
  while (std::getline(hs, field, '\t')) {
    auto eq = field.find('=');
    if (eq != std::string::npos) kv[field.substr(0, eq)] = field.substr(eq + 1);
  }
  for (const char* key : {"rule", "kind", "base", "relation", "labels"})
    if (!kv.count(key)) throw DataError(path + ": predictions header lacks '" + key + "'");
  PredictionsHeader h;
  h.rule = rule_from_string(kv["rule"]);
  h.labels = detail::declared_space(split_list(kv["labels"]), label_kind_from_string(kv["kind"]), kv["base"]);
  h.relation = kv["relation"] == "1";
  const std::size_t L = h.labels.size();
  const std::size_t expect = 2 + (h.relation ? 1 : 0) + 1 + L + 1;
  std::vector<ScoredDyad> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    while (std::getline(ls, field, '\t')) f.push_back(field);
    if (f.size() != expect)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(expect) + " fields");
    ScoredDyad s;
    std::size_t i = 0;
    s.row = f[i++];
    s.col = f[i++];
    if (h.relation) s.relation = detail::parse_index(f[i++]).value_or(0);
    s.prediction = f[i++];
    s.fallback = f.back() == "fallback";
    if (!s.fallback)
      for (std::size_t y = 0; y < L; ++y) {
        auto v = detail::parse_double(f[i + y]);
        if (!v) throw DataError(path + ":" + std::to_string(line_no) + ": bad probability '" + f[i + y] + "'");
        s.probs.push_back(*v);
      }
    rows.push_back(std::move(s));
  }
  return {std::move(h), std::move(rows)};
}

// ---------------------------------------------------------------------------
// Metrics over predictions

std::string canonical_metric(const std::string& m) {
  if (m == "zero-one" || m == "zero_one" || m == "01") return "zero_one";
  if (m == "mae" || m == "rmse" || m == "auc" || m == "ece") return m;
  throw ConfigError("unknown metric '" + m + "' (zero-one, mae, rmse, auc, ece)");
}

std::vector<std::string> default_metrics(const LabelSpace& labels) {
  if (labels.size() == 2) return {"auc", "zero_one", "ece"};
  if (labels.kind() == LabelKind::ordinal) return {"mae", "rmse"};
  return {"zero_one", "ece"};
}

/// Metric of scored dyads against true label indices.
double metric_value(const std::string& metric, const PredictionsHeader& h, const std::vector<ScoredDyad>& pred,
                    const std::vector<std::size_t>& truth, std::size_t bins) {
  const auto& labels = h.labels;
  const std::size_t n = pred.size();
  auto need_probs = [&] {
    for (const auto& s : pred)
      if (s.fallback) throw DataError(metric + " needs probabilities, but some predictions came from the fallback");
  };
  if (metric == "zero_one") {
    if (h.rule == PredictionRule::mean) throw ConfigError("zero-one error needs --rule mode or median");
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = labels.index_of(pred[i].prediction);
    return zero_one_error(p, truth);
  }
  if (metric == "mae" || metric == "rmse") {
    if (!labels.has_values()) throw ConfigError(metric + " needs numeric labels");
    std::vector<double> p(n), t(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (h.rule == PredictionRule::mean && !pred[i].fallback) {
        p[i] = *detail::parse_double(pred[i].prediction);
      } else if (auto y = labels.find(pred[i].prediction)) {
        p[i] = labels.value(*y);
      } else {
        auto v = detail::parse_double(pred[i].prediction);
        if (!v) throw DataError("bad prediction '" + pred[i].prediction + "'");
        p[i] = *v;
      }
      t[i] = labels.value(truth[i]);
    }
    return metric == "mae" ? mae(p, t) : rmse(p, t);
  }
  need_probs();
  if (metric == "auc") {
    if (labels.size() != 2) throw ConfigError("auc needs a binary label space");
    const std::size_t pos = positive_index(labels);
    std::vector<double> s(n);
    std::vector<int> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = pred[i].probs[pos];
      t[i] = truth[i] == pos ? 1 : 0;
    }
    return auc(s, t);
  }
  // ece
  std::vector<double> p(n);
  std::vector<int> t(n);
  if (labels.size() == 2) {
    const std::size_t pos = positive_index(labels);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = pred[i].probs[pos];
      t[i] = truth[i] == pos ? 1 : 0;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t top = argmax_label(pred[i].probs);
      p[i] = pred[i].probs[top];
      t[i] = truth[i] == top ? 1 : 0;
    }
  }
  return calibration_report(p, t, bins).ece;
}

bool higher_is_better(const std::string& metric) { return metric == "auc"; }

// ---------------------------------------------------------------------------
// Subcommands

struct Dyads {
  std::vector<std::string> rows, cols;
  std::vector<std::size_t> relations;
  std::vector<double> side;  // n x side_dim
};

Dyads read_dyads(const std::string& path, const ModelFile& mf, const SideTable* table) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  const std::size_t side_dim = mf.model.shape().side_dim;
  const std::size_t first = mf.relation_column ? 3 : 2;
  Dyads d;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto f = detail::split_fields(t);
    auto where = [&] { return path + ":" + std::to_string(line_no) + ": "; };
    if (f.size() < first) throw DataError(where() + "expected at least " + std::to_string(first) + " fields");
    d.rows.push_back(f[0]);
    d.cols.push_back(f[1]);
    std::size_t rel = 0;
    if (mf.relation_column) {
      auto r = detail::parse_index(f[2]);
      if (!r) throw DataError(where() + "bad relation index '" + f[2] + "'");
      rel = *r;
    }
    d.relations.push_back(rel);
    if (side_dim == 0) continue;
    if (table) {
      auto s = side_vector(*table, f[0], f[1]);
      if (s.size() != side_dim) throw DataError("side table dimension does not match the model");
      d.side.insert(d.side.end(), s.begin(), s.end());
      continue;
    }
    // Inline side features follow an optional label field.
    const std::size_t rest = f.size() - first;
    if (rest != side_dim && rest != side_dim + 1)
      throw DataError(where() + "expected " + std::to_string(side_dim) + " side values (or pass --side)");
    for (std::size_t j = f.size() - side_dim; j < f.size(); ++j) {
      auto v = detail::parse_double(f[j]);
      if (!v) throw DataError(where() + "bad side value '" + f[j] + "'");
      d.side.push_back(*v);
    }
  }
  return d;
}

std::vector<ScoredDyad> score_all(const Scorer& scorer, const Dyads& d, std::size_t side_dim) {
  std::vector<ScoredDyad> out;
  out.reserve(d.rows.size());
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    std::span<const double> side;
    if (side_dim) side = {d.side.data() + i * side_dim, side_dim};
    out.push_back(scorer.score(d.rows[i], d.cols[i], d.relations[i], side));
  }
  return out;
}

void write_manifest(const Manifest& m, const Resolved& r, const std::string& path, bool print) {
  const json j = m.to_json(r);
  if (!path.empty()) {
    auto out = open_out(path);
    out << j.dump(1) << '\n';
  }
  if (print) std::cout << j.dump(1) << '\n';
}

std::string manifest_path(const std::string& explicit_path, const std::string& out) {
  if (!explicit_path.empty()) return explicit_path;
  if (out.empty() || out == "-") return {};
  return out + ".manifest.json";
}

// train ---------------------------------------------------------------------

struct TrainCmd {
  Resolved r;
  ModelFlags model;
  FitFlags fit;
  std::string data, out, report, checkpoint_dir, manifest;
  bool coldstart = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "fit a model to a triplet file");
    r.option(c, "data", data, "training triplets")->required();
    model.add(r, c);
    fit.add(r, c);
    r.flag(c, "coldstart", coldstart, "two-stage fit: latent weights, then side weights with latents frozen");
    r.option(c, "checkpoint-dir", checkpoint_dir, "write the model after every epoch here");
    r.option(c, "report", report, "write the fit report as JSON");
    r.option(c, "out", out, "model file")->required();
    c->add_option("--manifest", manifest, "run manifest path (default: <out>.manifest.json)");
  }

  int run() {
    model.resolve();
    fit.resolve();
    Manifest m("train");
    m.inputs.push_back(data);
    if (!model.side.empty()) m.inputs.push_back(model.side);
    m.seeds = fit.seeds();
    const DyadDataset d = model.load(data);

    EpochCallback cb;
    std::size_t stage = 1, last = 0;
    if (!checkpoint_dir.empty()) {
      fs::create_directories(checkpoint_dir);
      cb = [&](std::size_t epoch, const LflModel& mdl) {
        if (epoch <= last) ++stage;
        last = epoch;
        char name[64];
        if (coldstart) std::snprintf(name, sizeof name, "stage%zu-epoch-%04zu.json", stage, epoch);
        else std::snprintf(name, sizeof name, "epoch-%04zu.json", epoch);
        save_model((fs::path(checkpoint_dir) / name).string(), mdl);
      };
    }
    Trained t = train(model, fit, coldstart, d, cb);

    ModelFile f{t.model, d.row_ids.names(), d.col_ids.names(), d.shared_ids, d.relation_column, std::nullopt};
    if (d.labels.kind() == LabelKind::ordinal && d.labels.has_values()) f.fallback = ColdStartFallback(t.model, d);
    write_json_file(out, to_json(f));
    m.outputs.push_back(out);

    json reports = json::array();
    for (std::size_t i = 0; i < t.reports.size(); ++i) {
      const std::string title = t.reports.size() > 1 ? "stage " + std::to_string(i + 1) : "fit";
      print_report(std::cout, t.reports[i], title + " (" + fit.objective + ", " + fit.optimizer + ")");
      reports.push_back(report_json(t.reports[i]));
    }
    if (!report.empty()) {
      write_json_file(report, reports.size() == 1 ? reports[0] : reports);
      m.outputs.push_back(report);
    }
    json summary = reports;
    for (auto& s : summary) s.erase("trace");
    m.extra["fit_report"] = summary.size() == 1 ? summary[0] : summary;
    write_manifest(m, r, manifest_path(manifest, out), true);
    return 0;
  }
};

// predict -------------------------------------------------------------------

struct PredictCmd {
  Resolved r;
  std::string model, data, side, rule, out = "-", manifest;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("predict", "score a dyads file with a trained model");
    r.option(c, "model", model, "model file")->required();
    r.option(c, "data", data, "dyads: row, col[, relation][, label][, side...]")->required();
    r.option(c, "side", side, "side feature table (side-information models)");
    r.option(c, "rule", rule, "mode|median|mean (default: mean for ordinal, mode for nominal)")
        ->check(CLI::IsMember({"", "mode", "median", "mean"}));
    r.option(c, "out", out, "predictions file ('-' for stdout)");
    c->add_option("--manifest", manifest, "run manifest path (default: <out>.manifest.json)");
  }

  int run() {
    Manifest m("predict");
    m.inputs = {model, data};
    const ModelFile f = model_file_from_json(read_json_file(model));
    if (rule.empty()) rule = to_string(default_rule(f.model.labels()));
    std::optional<SideTable> table;
    if (!side.empty()) {
      table = load_side_table(side);
      m.inputs.push_back(side);
    }
    const PredictionsHeader h{rule_from_string(rule), f.model.labels(), f.relation_column};
    const Scorer scorer(f, h.rule);
    const Dyads d = read_dyads(data, f, table ? &*table : nullptr);
    const auto scored = score_all(scorer, d, f.model.shape().side_dim);
    if (out == "-") {
      write_predictions(std::cout, h, scored);
    } else {
      auto o = open_out(out);
      write_predictions(o, h, scored);
      m.outputs.push_back(out);
    }
    std::size_t fb = 0;
    for (const auto& s : scored) fb += s.fallback ? 1 : 0;
    m.extra["fallback_predictions"] = fb;
    if (out != "-") std::cout << "predicted " << scored.size() << " dyads (" << fb << " by fallback)\n";
    write_manifest(m, r, manifest_path(manifest, out), false);
    return 0;
  }
};

// eval ----------------------------------------------------------------------

struct EvalCmd {
  Resolved r;
  std::string predictions, truth, metric, format = "table", out, manifest;
  std::size_t bins = 10;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "compare predictions with true labels");
    r.option(c, "predictions", predictions, "predictions file from `predict`")->required();
    r.option(c, "truth", truth, "triplets holding the true labels, same dyads in the same order")->required();
    r.option(c, "metric", metric, "comma list of zero-one, mae, rmse, auc, ece (default by label kind)");
    r.option(c, "bins", bins, "calibration bins");
    r.option(c, "format", format, "table|json")->check(CLI::IsMember({"table", "json"}));
    r.option(c, "out", out, "also write the metric records as JSON");
    c->add_option("--manifest", manifest, "run manifest path (default: <out>.manifest.json)");
  }

  int run() {
    Manifest m("eval");
    m.inputs = {predictions, truth};
    auto [h, pred] = read_predictions(predictions);
    LoadOptions lo;
    lo.label_space = h.labels;
    lo.relation_column = h.relation;
    const DyadDataset t = load_triplets(truth, lo);
    if (t.size() != pred.size())
      throw DataError("truth has " + std::to_string(t.size()) + " dyads but predictions have " +
                      std::to_string(pred.size()));
    std::vector<std::size_t> labels(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& e = t.examples[i];
      if (t.row_ids.name(e.row) != pred[i].row || t.col_ids.name(e.col) != pred[i].col)
        throw DataError("dyad " + std::to_string(i + 1) + " differs between truth and predictions");
      labels[i] = e.label;
    }
    std::vector<std::string> names;
    for (const auto& s : metric.empty() ? default_metrics(h.labels) : split_list(metric))
      names.push_back(canonical_metric(s));
    if (metric.empty() && h.rule == PredictionRule::mean)
      std::erase(names, std::string("zero_one"));
    std::vector<MetricReport> reps;
    for (const auto& name : names)
      reps.push_back({name, metric_value(name, h, pred, labels, bins), pred.size(), std::nullopt});
    json records = json::array();
    for (const auto& rep : reps) records.push_back(to_json(rep));
    if (format == "json") std::cout << records.dump(1) << '\n';
    else print_metric_table(std::cout, reps);
    if (!out.empty()) {
      write_json_file(out, records);
      m.outputs.push_back(out);
    }
    write_manifest(m, r, manifest_path(manifest, out), false);
    return 0;
  }
};

// synth ---------------------------------------------------------------------

struct SynthCmd {
  Resolved r;
  std::size_t n = 100, rank = 5, labels = 3, features = 3;
  double retention = 0.8, scale = 1.5, test_fraction = 0.2, cold_fraction = 0.1;
  std::string range = "-3,3", out, manifest;
  std::size_t seed = 0;
  bool link = false, symmetric = false, draw_base = false, coldstart = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "generate a synthetic train/test pair with its truth");
    r.option(c, "n", n, "objects per side");
    r.option(c, "rank", rank, "generating rank");
    r.option(c, "labels", labels, "label count (nominal)");
    r.option(c, "retention", retention, "fraction of cells kept for training");
    r.option(c, "range", range, "generating weight range lo,hi (nominal)");
    r.option(c, "seed", seed, "generator seed");
    r.flag(c, "draw-base-weights", draw_base, "also draw the base label's generating weights (nominal)");
    r.flag(c, "link", link, "binary link graph instead of a nominal matrix");
    r.flag(c, "symmetric", symmetric, "undirected graph (with --link)");
    r.option(c, "scale", scale, "link weights uniform on [-scale, scale]");
    r.option(c, "test-fraction", test_fraction, "share of sampled links held out");
    r.flag(c, "coldstart", coldstart, "ordinal 1-5 ratings with side features and cold rows");
    r.option(c, "features", features, "side features per object (cold start)");
    r.option(c, "cold-fraction", cold_fraction, "rows held out entirely (cold start)");
    r.option(c, "out", out, "output directory")->required();
    c->add_option("--manifest", manifest, "run manifest path (default: <out>/manifest.json)");
  }

  int run() {
    if (link && coldstart) throw ConfigError("--link and --coldstart are exclusive");
    if (symmetric && !link) throw ConfigError("--symmetric needs --link");
    Manifest m("synth");
    m.seeds = {{"generator", seed}};
    fs::create_directories(out);
    const auto p = [&](const char* name) { return (fs::path(out) / name).string(); };
    json truth;
    if (link) {
      auto s = synth_link_graph(n, rank, symmetric, seed, scale, test_fraction);
      save_triplets(p("train.tsv"), s.train);
      save_triplets(p("test.tsv"), s.test);
      std::vector<double> score;
      std::vector<int> y;
      for (const auto& e : s.test.examples) {
        score.push_back(s.truth.prob(e.row, e.col));
        y.push_back(static_cast<int>(e.label));
      }
      truth = {{"kind", "link"}, {"n", n}, {"rank", rank}, {"symmetric", symmetric},
               {"train_size", s.train.size()}, {"test_size", s.test.size()}};
      truth["oracle_test_auc"] = score.empty() ? json(nullptr) : json(auc(score, y));
    } else if (coldstart) {
      ColdStartSynthOptions o;
      o.n = n;
      o.latent_rank = rank;
      o.feature_dim = features;
      o.retention = retention;
      o.cold_fraction = cold_fraction;
      auto s = synth_coldstart(o, seed);
      // Side features live in side.tsv; the triplet files carry labels only.
      auto strip = [](DyadDataset d) {
        d.side.clear();
        d.side_dim = 0;
        return d;
      };
      save_triplets(p("train.tsv"), strip(s.train));
      save_triplets(p("test.tsv"), strip(s.test));
      save_side_table(p("side.tsv"), s.side);
      m.outputs.push_back(p("side.tsv"));
      std::vector<std::string> cold;
      for (auto rr : s.cold_rows) cold.push_back(s.train.row_ids.name(rr));
      std::vector<double> expected;
      for (const auto& e : s.test.examples) expected.push_back(s.expected_rating(e.row, e.col));
      truth = {{"kind", "coldstart"}, {"n", n},           {"rank", rank},
               {"cold_rows", cold},   {"train_size", s.train.size()}, {"test_size", s.test.size()},
               {"test_expected_rating", expected}};
    } else {
      const auto lohi = parse_doubles(range, "--range");
      if (lohi.size() != 2) throw ConfigError("--range needs lo,hi");
      auto s = synth_nominal(n, rank, labels, retention, {lohi[0], lohi[1]}, seed, true, !draw_base);
      save_triplets(p("train.tsv"), s.train);
      save_triplets(p("test.tsv"), s.test);
      json cells = json::array();
      std::size_t bayes_wrong = 0;
      for (const auto& c : s.truth.heldout) {
        cells.push_back({s.train.row_ids.name(c.row), s.train.col_ids.name(c.col), s.train.labels.label(c.bayes_label),
                         c.bayes_prob});
        bayes_wrong += c.bayes_label != c.true_label ? 1 : 0;
      }
      truth = {{"kind", "nominal"},
               {"n", n},
               {"rank", rank},
               {"labels", s.train.labels.labels()},
               {"mean_bayes_error", s.truth.mean_bayes_error},
               {"heldout_bayes_error", s.truth.heldout.empty()
                                           ? 0.0
                                           : double(bayes_wrong) / double(s.truth.heldout.size())},
               {"heldout_columns", {"row", "col", "bayes_label", "bayes_prob"}},
               {"heldout", cells}};
    }
    write_json_file(p("truth.json"), truth);
    m.outputs.insert(m.outputs.begin(), {p("train.tsv"), p("test.tsv"), p("truth.json")});
    std::cout << "wrote " << p("train.tsv") << ", " << p("test.tsv") << ", " << p("truth.json") << '\n';
    write_manifest(m, r, manifest.empty() ? p("manifest.json") : manifest, false);
    return 0;
  }
};

// check-grad ----------------------------------------------------------------

struct CheckGradCmd {
  Resolved r;
  ModelFlags model;
  FitFlags fit;
  std::string data, model_path;
  double h = 1e-5, rel_tol = 1e-4, abs_floor = 1e-6, scale = 0.5;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("check-grad", "compare the analytic gradient with central differences");
    r.option(c, "data", data, "triplets the objective is evaluated on")->required();
    r.option(c, "model", model_path, "check at this model's weights (default: a random point)");
    model.add(r, c);
    fit.add(r, c);
    r.option(c, "point-scale", scale, "random point weights uniform on [-s, s]");
    r.option(c, "step", h, "finite-difference step");
    r.option(c, "rel-tol", rel_tol, "relative tolerance");
    r.option(c, "abs-floor", abs_floor, "absolute tolerance floor");
  }

  int run() {
    model.resolve();
    fit.resolve();
    LflModel m;
    DyadDataset d;
    if (!model_path.empty()) {
      const ModelFile f = model_file_from_json(read_json_file(model_path));
      LoadOptions lo = model.load_options();
      lo.label_space = f.model.labels();
      lo.relation_column = f.relation_column;
      lo.shared_ids = f.shared_ids;
      const IdMap rows = IdMap::from_names(f.row_ids), cols = IdMap::from_names(f.col_ids);
      lo.row_ids = &rows;
      lo.col_ids = &cols;
      d = load_triplets(data, lo);
      if (!model.side.empty()) attach_side(d, load_side_table(model.side));
      m = f.model;
    } else {
      d = model.load(data);
      TrainConfig cfg = fit.config();
      cfg.init_scale = scale;
      m = init_model(model.shape(d), cfg);
    }
    check_objective_labels(fit, d);
    const Objective obj{loss_from_string(fit.objective), fit.l2, fit.l2_side, fit.scale_reg};
    const auto a = gradient(m, d, obj, worker_count());
    const auto num = finite_difference_oracle(m, d, obj, h);
    const auto c = compare_gradients(a, num, rel_tol, abs_floor);
    std::cout << "parameters   " << c.count << '\n'
              << "max abs diff " << detail::format_double(c.max_abs) << '\n'
              << "max rel diff " << detail::format_double(c.max_rel) << '\n'
              << "failures     " << c.failures << '\n'
              << (c.ok() ? "PASS" : "FAIL") << '\n';
    return c.ok() ? 0 : kCheckFailed;
  }
};

// cluster -------------------------------------------------------------------

struct ClusterCmd {
  Resolved r;
  std::string model, which = "rows", label, out = "-", manifest;
  std::size_t k = 5, seed = 0;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("cluster", "k-means over one label's latent weight rows");
    r.option(c, "model", model, "model file")->required();
    r.option(c, "k", k, "clusters");
    r.option(c, "which", which, "rows|cols")->check(CLI::IsMember({"rows", "cols"}));
    r.option(c, "label", label, "label name (stereotype: base pair index; default: first non-base label)");
    r.option(c, "seed", seed, "k-means seed");
    r.option(c, "out", out, "assignment file ('-' for stdout)");
    c->add_option("--manifest", manifest, "run manifest path (default: <out>.manifest.json)");
  }

  int run() {
    Manifest m("cluster");
    m.inputs = {model};
    m.seeds = {{"kmeans", seed}};
    const ModelFile f = model_file_from_json(read_json_file(model));
    const auto& mdl = f.model;
    std::size_t set = 0;
    if (mdl.variant() == Variant::stereotype) {
      if (!label.empty()) {
        auto idx = detail::parse_index(label);
        if (!idx) throw ConfigError("--label must be a base pair index for stereotype models");
        set = *idx;
      }
    } else if (mdl.variant() != Variant::symmetric_link || mdl.set_count() > 1) {
      set = label.empty() ? positive_index(mdl.labels()) : mdl.labels().find(label).value_or(mdl.label_count());
      if (set >= mdl.label_count()) throw ConfigError("unknown label '" + label + "'");
      if (set == mdl.base_label()) throw ConfigError("the base label's weights are all zero");
    }
    const ObjectSide side = which == "rows" ? ObjectSide::rows : ObjectSide::cols;
    const auto res = cluster_latent(mdl, side, set, k, seed);
    const auto& ids = side == ObjectSide::rows || f.shared_ids ? f.row_ids : f.col_ids;
    auto write = [&](std::ostream& o) {
      for (std::size_t i : res.ordering) o << ids.at(i) << '\t' << res.assignment[i] << '\n';
    };
    if (out == "-") {
      write(std::cout);
    } else {
      auto o = open_out(out);
      write(o);
      m.outputs.push_back(out);
    }
    std::cerr << "k-means: " << res.iterations << " iterations, distortion "
              << detail::format_double(res.distortion.empty() ? 0.0 : res.distortion.back()) << '\n';
    write_manifest(m, r, manifest_path(manifest, out), false);
    return 0;
  }
};

// cv ------------------------------------------------------------------------

struct CvCmd {
  Resolved r;
  ModelFlags model;
  FitFlags fit;
  std::string data, grid = "0.001,0.01,0.1,1", metric, rule, out, manifest;
  std::size_t folds = 3;
  bool coldstart = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("cv", "choose the latent penalty by k-fold cross-validation");
    r.option(c, "data", data, "training triplets")->required();
    model.add(r, c);
    fit.add(r, c);
    r.flag(c, "coldstart", coldstart, "two-stage fit per fold");
    r.option(c, "grid", grid, "comma list of --l2 values");
    r.option(c, "folds", folds, "folds");
    r.option(c, "metric", metric, "selection metric (default: mae ordinal, auc binary, zero-one nominal)");
    r.option(c, "rule", rule, "prediction rule for the metric")->check(CLI::IsMember({"", "mode", "median", "mean"}));
    r.option(c, "out", out, "write the grid results as JSON");
    c->add_option("--manifest", manifest, "run manifest path (default: <out>.manifest.json)");
  }

  int run() {
    model.resolve();
    fit.resolve();
    if (folds < 2) throw ConfigError("--folds must be >= 2");
    const auto lambdas = parse_doubles(grid, "--grid");
    if (lambdas.empty()) throw ConfigError("--grid is empty");
    Manifest m("cv");
    m.inputs.push_back(data);
    if (!model.side.empty()) m.inputs.push_back(model.side);
    m.seeds = fit.seeds();
    m.seeds["folds"] = fit.seed;
    const DyadDataset d = model.load(data);
    check_objective_labels(fit, d);
    if (d.size() < folds) throw DataError("fewer examples than folds");
    if (metric.empty())
      metric = d.labels.size() == 2 ? "auc" : d.labels.kind() == LabelKind::ordinal ? "mae" : "zero_one";
    metric = canonical_metric(metric);
    if (rule.empty()) rule = metric == "mae" || metric == "rmse" ? "mean" : "mode";
    if (rule != "mode" && d.labels.kind() != LabelKind::ordinal) throw ConfigError("--rule " + rule + " needs ordinal labels");

    // Seeded shuffle, then round-robin fold assignment.
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(fit.seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> fold_train(folds), fold_test(folds);
    for (std::size_t i = 0; i < order.size(); ++i)
      for (std::size_t f = 0; f < folds; ++f) (i % folds == f ? fold_test : fold_train)[f].push_back(order[i]);
    for (auto& v : fold_train) std::sort(v.begin(), v.end());
    for (auto& v : fold_test) std::sort(v.begin(), v.end());

    const PredictionsHeader h{rule_from_string(rule), d.labels, d.relation_column};
    std::vector<MetricReport> table;
    json results = json::array();
    std::optional<std::size_t> best;
    for (std::size_t li = 0; li < lambdas.size(); ++li) {
      FitFlags ff = fit;
      ff.l2 = lambdas[li];
      if (fit.l2_side == fit.l2) ff.l2_side = lambdas[li];  // side penalty follows the grid unless set apart
      std::vector<double> values;
      for (std::size_t f = 0; f < folds; ++f) {
        const DyadDataset tr = d.subset(fold_train[f]), te = d.subset(fold_test[f]);
        Trained t = train(model, ff, coldstart, tr);
        ModelFile mf{t.model, d.row_ids.names(), d.col_ids.names(), d.shared_ids, d.relation_column, std::nullopt};
        if (d.labels.kind() == LabelKind::ordinal && d.labels.has_values()) mf.fallback = ColdStartFallback(t.model, tr);
        const Scorer scorer(mf, h.rule);
        std::vector<ScoredDyad> scored;
        std::vector<std::size_t> truth;
        for (std::size_t i = 0; i < te.size(); ++i) {
          const auto& e = te.examples[i];
          scored.push_back(scorer.score(d.row_ids.name(e.row), d.col_ids.name(e.col), e.relation, te.side_of(i)));
          truth.push_back(e.label);
        }
        values.push_back(metric_value(metric, h, scored, truth, 10));
      }
      auto rep = aggregate("l2=" + shortest(lambdas[li]), values, d.size());
      results.push_back({{"l2", lambdas[li]}, {"metric", metric}, {"value", rep.value},
                         {"std", rep.std ? json(*rep.std) : json(nullptr)}, {"folds", values}});
      const bool better = !best || (higher_is_better(metric) ? rep.value > table[*best].value
                                                              : rep.value < table[*best].value);
      if (better) best = li;
      table.push_back(std::move(rep));
    }
    std::cout << folds << "-fold cross-validation, metric " << metric << '\n';
    print_metric_table(std::cout, table);
    std::cout << "best l2 " << shortest(lambdas[*best]) << '\n';
    const json doc{{"metric", metric}, {"folds", folds}, {"grid", results}, {"best_l2", lambdas[*best]}};
    if (!out.empty()) {
      write_json_file(out, doc);
      m.outputs.push_back(out);
    }
    m.extra["best_l2"] = lambdas[*best];
    write_manifest(m, r, manifest_path(manifest, out), false);
    return 0;
  }
};

int run(std::vector<std::string> args);

// replay --------------------------------------------------------------------

struct ReplayCmd {
  std::string manifest;
  bool force = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("replay", "re-run a command from its manifest");
    c->add_option("manifest", manifest, "manifest file")->required();
    c->add_flag("--force", force, "run even if an input's digest changed");
  }

  int run_replay() {
    const json j = read_json_file(manifest);
    if (j.value("format", "") != "lfl-manifest") throw DataError(manifest + ": not an lfl manifest");
    try {
      for (const auto& in : j.at("inputs")) {
        const auto path = in.at("path").get<std::string>();
        if (sha256_file(path) != in.at("sha256").get<std::string>() && !force)
          throw DataError("input '" + path + "' changed since the manifest was written (use --force)");
      }
      return run(j.at("argv").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
      throw DataError(manifest + ": malformed manifest: " + e.what());
    }
  }
};

int run(std::vector<std::string> args) {
  CLI::App app{"Latent feature log-linear models for dyadic prediction", "lfl"};
  app.require_subcommand(1);
  TrainCmd train_cmd;
  PredictCmd predict_cmd;
  EvalCmd eval_cmd;
  SynthCmd synth_cmd;
  CheckGradCmd grad_cmd;
  ClusterCmd cluster_cmd;
  CvCmd cv_cmd;
  ReplayCmd replay_cmd;
  train_cmd.add(app);
  predict_cmd.add(app);
  eval_cmd.add(app);
  synth_cmd.add(app);
  grad_cmd.add(app);
  cluster_cmd.add(app);
  cv_cmd.add(app);
  replay_cmd.add(app);

  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "train") return train_cmd.run();
  if (name == "predict") return predict_cmd.run();
  if (name == "eval") return eval_cmd.run();
  if (name == "synth") return synth_cmd.run();
  if (name == "check-grad") return grad_cmd.run();
  if (name == "cluster") return cluster_cmd.run();
  if (name == "cv") return cv_cmd.run();
  return replay_cmd.run_replay();
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const ConfigError& e) {
    std::cerr << "lfl: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "lfl: data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "lfl: numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "lfl: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "lfl: configuration error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "lfl: data error: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "lfl: data error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "lfl: " << e.what() << '\n';
    return 1;
  }
}
