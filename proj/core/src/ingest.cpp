#include "upliftrank/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "upliftrank/mathutil.hpp"

namespace uplift::ingest {

using nlohmann::json;

void SplitRatios::validate() const {
  for (double f : {train, val, test}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw InvalidConfigError("split fractions must lie in (0, 1)");
    }
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw InvalidConfigError("split fractions must sum to 1");
  }
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.emplace_back(trim(std::string_view(line).substr(start)));
      break;
    }
    fields.emplace_back(
        trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

double parse_real(std::string_view tok, long row, const std::string& col) {
  double v = 0.0;
  const char* begin = tok.data();
  const char* end = tok.data() + tok.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError("cannot parse '" + std::string(tok) +
                         "' as a finite real in column " + col,
                     row);
  }
  return v;
}

int parse_treatment(std::string_view tok, long row) {
  if (tok == "0") return 0;
  if (tok == "1") return 1;
  throw ParseError("treatment indicator must be exactly 0 or 1, got '" +
                       std::string(tok) + "'",
                   row);
}

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

double median_of(std::vector<double> v) {
  if (v.empty()) throw InvalidConfigError("median of empty vector");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid) - 1,
                   v.begin() + static_cast<long>(mid));
  return 0.5 * (v[mid - 1] + upper);
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + " is empty");
  const std::vector<std::string> header = split_fields(line);

  std::unordered_map<std::string, Eigen::Index> by_name;
  for (std::size_t j = 0; j < header.size(); ++j) {
    by_name.emplace(header[j], static_cast<Eigen::Index>(j));
  }
  auto require = [&](const std::string& name) -> Eigen::Index {
    const auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw SchemaError("missing column '" + name + "' in " + path);
    }
    return it->second;
  };
  auto optional = [&](const std::string& name) -> std::optional<Eigen::Index> {
    const auto it = by_name.find(name);
    if (it == by_name.end()) return std::nullopt;
    return it->second;
  };

  const Eigen::Index t_col = require(schema.t);
  const Eigen::Index yr_col = require(schema.y_r);
  const Eigen::Index yc_col = require(schema.y_c);
  const auto id_col = schema.id.empty() ? std::nullopt : optional(schema.id);
  const auto strat_col =
      schema.strategy.empty() ? std::nullopt : optional(schema.strategy);

  std::vector<Eigen::Index> feat_cols;
  std::vector<std::string> feat_names;
  if (schema.features.empty()) {
    std::unordered_set<Eigen::Index> used = {t_col, yr_col, yc_col};
    if (id_col) used.insert(*id_col);
    if (strat_col) used.insert(*strat_col);
    for (std::size_t j = 0; j < header.size(); ++j) {
      const auto idx = static_cast<Eigen::Index>(j);
      if (!used.count(idx)) {
        feat_cols.push_back(idx);
        feat_names.push_back(header[j]);
      }
    }
  } else {
    for (const std::string& name : schema.features) {
      feat_cols.push_back(require(name));
      feat_names.push_back(name);
    }
  }
  if (feat_cols.empty()) {
    throw SchemaError("no feature columns in " + path);
  }

  std::vector<std::string> ids;
  std::vector<Strategy> strat;
  std::vector<int> t;
  std::vector<double> y_r, y_c, feats;
  long row = 1;  // header line
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(fields.size()),
                       row);
    }
    ids.push_back(id_col ? fields[static_cast<std::size_t>(*id_col)]
                         : std::to_string(t.size()));
    strat.push_back(strategy_from_string(
        strat_col ? fields[static_cast<std::size_t>(*strat_col)] : ""));
    t.push_back(
        parse_treatment(fields[static_cast<std::size_t>(t_col)], row));
    y_r.push_back(
        parse_real(fields[static_cast<std::size_t>(yr_col)], row, schema.y_r));
    y_c.push_back(
        parse_real(fields[static_cast<std::size_t>(yc_col)], row, schema.y_c));
    for (std::size_t k = 0; k < feat_cols.size(); ++k) {
      feats.push_back(
          parse_real(fields[static_cast<std::size_t>(feat_cols[k])], row,
                     feat_names[k]));
    }
  }
  const auto n = static_cast<Eigen::Index>(t.size());
  if (n == 0) throw SchemaError(path + " has no data rows");
  const auto d = static_cast<Eigen::Index>(feat_cols.size());
  MatrixXd x(n, d);
  VectorXi tv(n);
  VectorXd yrv(n), ycv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    tv[i] = t[static_cast<std::size_t>(i)];
    yrv[i] = y_r[static_cast<std::size_t>(i)];
    ycv[i] = y_c[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = feats[static_cast<std::size_t>(i * d + j)];
    }
  }
  Dataset ds(std::move(ids), std::move(x), std::move(tv), std::move(yrv),
             std::move(ycv), std::move(strat), path);
  split_cohorts(ds);  // reject single-cohort files
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "id,strategy,t,y_r,y_c";
  for (Eigen::Index j = 0; j < ds.d(); ++j) out << ",f" << j;
  out << "\n";
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << ds.ids()[static_cast<std::size_t>(i)] << ','
        << to_string(ds.strategy()[static_cast<std::size_t>(i)]) << ','
        << ds.t()[i] << ',' << fmt_real(ds.y_r()[i]) << ','
        << fmt_real(ds.y_c()[i]);
    for (Eigen::Index j = 0; j < ds.d(); ++j) {
      out << ',' << fmt_real(ds.x()(i, j));
    }
    out << "\n";
  }
}

SplitResult split_dataset(const Dataset& ds, const SplitRatios& r,
                          RngSeed seed) {
  r.validate();
  const Eigen::Index n = ds.n();
  if (n < 5) throw InvalidConfigError("split needs at least 5 samples");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  const auto cut1 =
      static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * r.train));
  const auto cut2 = static_cast<Eigen::Index>(
      std::floor(static_cast<double>(n) * (r.train + r.val)));

  const std::vector<Eigen::Index> train_idx(perm.begin(), perm.begin() + cut1);
  const std::vector<Eigen::Index> val_idx(perm.begin() + cut1,
                                          perm.begin() + cut2);
  const std::vector<Eigen::Index> test_idx(perm.begin() + cut2, perm.end());

  auto check = [&](const std::vector<Eigen::Index>& part,
                   const char* name) {
    int seen[2] = {0, 0};
    for (Eigen::Index i : part) seen[ds.t()[i]] = 1;
    if (!seen[0] || !seen[1]) {
      throw EmptyCohortError(std::string("split lost a cohort in the ") +
                             name + " part");
    }
  };
  check(train_idx, "train");
  check(val_idx, "val");
  check(test_idx, "test");

  return {ds.subset(train_idx), ds.subset(val_idx), ds.subset(test_idx)};
}

double TauSpec::evaluate(const Eigen::Ref<const VectorXd>& x) const {
  const double lin = w.dot(x) + b;
  switch (form) {
    case TauForm::kLinear:
      return lin;
    case TauForm::kLinearPlusSine:
      return lin + std::sin(x[0]);
    case TauForm::kSoftplus:
      return softplus(lin);
  }
  throw InvalidConfigError("unknown tau form");
}

double LinearSpec::evaluate(const Eigen::Ref<const VectorXd>& x) const {
  return w.dot(x) + b;
}

double PropensitySpec::evaluate(const Eigen::Ref<const VectorXd>& x) const {
  if (!logistic) return e;
  // Clamped away from 0/1 so both cohorts appear at any sample size.
  return clamp01(sigmoid(w.dot(x) + b), 0.05, 0.95);
}

void SyntheticConfig::validate() const {
  if (n < 10) throw InvalidConfigError("synthetic n must be >= 10");
  if (d < 1) throw InvalidConfigError("synthetic d must be >= 1");
  if (!treat_prob.logistic &&
      !(treat_prob.e >= 0.05 && treat_prob.e <= 0.95)) {
    throw InvalidConfigError(
        "constant treatment probability must lie in [0.05, 0.95]");
  }
  auto check_w = [&](const VectorXd& w, const char* name) {
    if (w.size() != d) {
      throw InvalidConfigError(std::string(name) +
                               " weights must have length d");
    }
  };
  check_w(tau_r.w, "tau_r");
  check_w(tau_c.w, "tau_c");
  check_w(mu0_r.w, "mu0_r");
  check_w(mu0_c.w, "mu0_c");
  if (treat_prob.logistic) check_w(treat_prob.w, "propensity");
  if (noise_sd < 0.0) throw InvalidConfigError("noise_sd must be >= 0");
}

SyntheticConfig SyntheticConfig::defaults(Eigen::Index n, int d) {
  SyntheticConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.treat_prob.e = 0.5;

  cfg.tau_r.w = VectorXd::Zero(d);
  cfg.tau_r.w[0] = 1.0;
  if (d > 1) cfg.tau_r.w[1] = 0.3;
  cfg.tau_r.b = 1.0;
  cfg.tau_r.form = TauForm::kLinearPlusSine;

  cfg.tau_c.w = VectorXd::Zero(d);
  cfg.tau_c.w[0] = -0.5;
  cfg.tau_c.b = 0.7;
  cfg.tau_c.form = TauForm::kSoftplus;

  cfg.mu0_r.w = VectorXd::Constant(d, 0.2);
  cfg.mu0_r.b = 2.0;
  cfg.mu0_c.w = VectorXd::Constant(d, 0.05);
  cfg.mu0_c.b = 0.2;
  return cfg;
}

MatrixXd draw_features(Eigen::Index n, int d, Rng& rng) {
  MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rng.normal();
  }
  return x;
}

GroundTruth evaluate_ground_truth(const SyntheticConfig& cfg,
                                  const MatrixXd& X) {
  GroundTruth gt;
  const Eigen::Index n = X.rows();
  gt.tau_r_true = VectorXd(n);
  gt.tau_c_true = VectorXd(n);
  gt.propensity_true = VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    gt.tau_r_true[i] = cfg.tau_r.evaluate(X.row(i).transpose());
    gt.tau_c_true[i] = cfg.tau_c.evaluate(X.row(i).transpose());
    gt.propensity_true[i] = cfg.treat_prob.evaluate(X.row(i).transpose());
  }
  return gt;
}

void realize_outcomes(const SyntheticConfig& cfg, const MatrixXd& X,
                      const VectorXi& t, Rng& rng, VectorXd* y_r,
                      VectorXd* y_c) {
  const Eigen::Index n = X.rows();
  if (t.size() != n) throw ShapeMismatchError("t has wrong length");
  y_r->resize(n);
  y_c->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto x = X.row(i).transpose();
    double r = cfg.mu0_r.evaluate(x) + t[i] * cfg.tau_r.evaluate(x);
    double c = cfg.mu0_c.evaluate(x) + t[i] * cfg.tau_c.evaluate(x);
    if (cfg.noise_sd > 0.0) {
      r += cfg.noise_sd * rng.normal();
      c += cfg.noise_sd * rng.normal();
    }
    (*y_r)[i] = r;
    (*y_c)[i] = c;
  }
}

std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& cfg,
                                                   RngSeed seed) {
  cfg.validate();
  Rng rng(seed);
  MatrixXd x = draw_features(cfg.n, cfg.d, rng);
  GroundTruth gt = evaluate_ground_truth(cfg, x);
  VectorXi t(cfg.n);
  for (Eigen::Index i = 0; i < cfg.n; ++i) {
    t[i] = rng.bernoulli(gt.propensity_true[i]) ? 1 : 0;
  }
  VectorXd y_r, y_c;
  realize_outcomes(cfg, x, t, rng, &y_r, &y_c);
  Dataset ds({}, std::move(x), std::move(t), std::move(y_r), std::move(y_c),
             {}, "synthetic");
  return {std::move(ds), std::move(gt)};
}

void write_groundtruth_csv(const GroundTruth& gt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << "tau_r_true,tau_c_true,propensity_true\n";
  for (Eigen::Index i = 0; i < gt.tau_r_true.size(); ++i) {
    out << fmt_real(gt.tau_r_true[i]) << ',' << fmt_real(gt.tau_c_true[i])
        << ',' << fmt_real(gt.propensity_true[i]) << "\n";
  }
}

GroundTruth load_groundtruth_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + " is empty");
  if (split_fields(line) !=
      std::vector<std::string>{"tau_r_true", "tau_c_true",
                               "propensity_true"}) {
    throw SchemaError("unexpected ground-truth header in " + path);
  }
  std::vector<double> r, c, e;
  long row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 3) throw ParseError("expected 3 fields", row);
    r.push_back(parse_real(fields[0], row, "tau_r_true"));
    c.push_back(parse_real(fields[1], row, "tau_c_true"));
    e.push_back(parse_real(fields[2], row, "propensity_true"));
  }
  GroundTruth gt;
  const auto n = static_cast<Eigen::Index>(r.size());
  gt.tau_r_true = Eigen::Map<const VectorXd>(r.data(), n);
  gt.tau_c_true = Eigen::Map<const VectorXd>(c.data(), n);
  gt.propensity_true = Eigen::Map<const VectorXd>(e.data(), n);
  return gt;
}

Eigen::Index RawTable::col(const std::string& name) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == name) return static_cast<Eigen::Index>(j);
  }
  throw SchemaError("missing column '" + name + "' in raw table");
}

bool RawTable::has_col(const std::string& name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

RawTable load_raw_table(const std::string& path,
                        std::vector<std::string> names) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  RawTable table;
  std::string line;
  long row = 0;
  if (names.empty()) {
    if (!std::getline(in, line)) throw SchemaError(path + " is empty");
    ++row;
    table.columns = split_fields(line);
  } else {
    table.columns = std::move(names);
  }
  const std::size_t width = table.columns.size();
  std::vector<double> cells;
  Eigen::Index n = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " fields, got " +
                           std::to_string(fields.size()),
                       row);
    }
    for (std::size_t j = 0; j < width; ++j) {
      cells.push_back(parse_real(fields[j], row, table.columns[j]));
    }
    ++n;
  }
  table.values = MatrixXd(n, static_cast<Eigen::Index>(width));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      table.values(i, static_cast<Eigen::Index>(j)) =
          cells[static_cast<std::size_t>(i) * width + j];
    }
  }
  return table;
}

RawTable subsample_rows(const RawTable& raw, Eigen::Index keep, RngSeed seed) {
  const Eigen::Index n = raw.values.rows();
  if (keep >= n) return raw;
  if (keep < 1) throw InvalidConfigError("subsample size must be >= 1");
  Rng rng(seed);
  auto perm = rng.permutation(n);
  perm.resize(static_cast<std::size_t>(keep));
  std::sort(perm.begin(), perm.end());
  RawTable out;
  out.columns = raw.columns;
  out.values = MatrixXd(keep, raw.values.cols());
  for (Eigen::Index i = 0; i < keep; ++i) {
    out.values.row(i) = raw.values.row(perm[static_cast<std::size_t>(i)]);
  }
  return out;
}

CensusManifest CensusManifest::defaults() {
  CensusManifest m;
  m.drop_columns = {"dHour89",  "dIncome2", "dIncome3", "dIncome4",
                    "dIncome5", "dIncome6", "dIncome7", "dIncome8",
                    "iMarital", "iRspouse", "dAncstry1", "dAncstry2",
                    "dRearning", "dRpincome", "dPoverty", "dWeek89",
                    "iWork89"};
  return m;
}

CensusManifest CensusManifest::from_json(const json& j) {
  CensusManifest m = defaults();
  m.id_column = j.value("id_column", m.id_column);
  m.hours_column = j.value("hours_column", m.hours_column);
  m.income_column = j.value("income_column", m.income_column);
  m.fertility_column = j.value("fertility_column", m.fertility_column);
  m.citizen_column = j.value("citizen_column", m.citizen_column);
  m.age_column = j.value("age_column", m.age_column);
  if (j.contains("drop_columns")) {
    m.drop_columns = j.at("drop_columns").get<std::vector<std::string>>();
  }
  return m;
}

json CensusManifest::to_json() const {
  json j;
  j["id_column"] = id_column;
  j["hours_column"] = hours_column;
  j["income_column"] = income_column;
  j["fertility_column"] = fertility_column;
  j["citizen_column"] = citizen_column;
  j["age_column"] = age_column;
  j["drop_columns"] = drop_columns;
  return j;
}

CovtypeManifest CovtypeManifest::defaults() { return {}; }

CovtypeManifest CovtypeManifest::from_json(const json& j) {
  CovtypeManifest m = defaults();
  m.elevation_column = j.value("elevation_column", m.elevation_column);
  m.hydrology_column = j.value("hydrology_column", m.hydrology_column);
  m.fire_column = j.value("fire_column", m.fire_column);
  m.cover_column = j.value("cover_column", m.cover_column);
  m.spruce_fir_code = j.value("spruce_fir_code", m.spruce_fir_code);
  m.lodgepole_code = j.value("lodgepole_code", m.lodgepole_code);
  if (j.contains("drop_columns")) {
    m.drop_columns = j.at("drop_columns").get<std::vector<std::string>>();
  }
  return m;
}

json CovtypeManifest::to_json() const {
  json j;
  j["elevation_column"] = elevation_column;
  j["hydrology_column"] = hydrology_column;
  j["fire_column"] = fire_column;
  j["cover_column"] = cover_column;
  j["spruce_fir_code"] = spruce_fir_code;
  j["lodgepole_code"] = lodgepole_code;
  j["drop_columns"] = drop_columns;
  return j;
}

namespace {

Dataset assemble_recipe_dataset(const RawTable& raw,
                                const std::vector<Eigen::Index>& rows,
                                const std::vector<Eigen::Index>& feat_cols,
                                std::vector<std::string> ids, VectorXi t,
                                VectorXd y_r, VectorXd y_c,
                                const std::string& meta) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(feat_cols.size());
  MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      x(i, j) = raw.values(rows[static_cast<std::size_t>(i)],
                           feat_cols[static_cast<std::size_t>(j)]);
    }
  }
  Dataset ds(std::move(ids), std::move(x), std::move(t), std::move(y_r),
             std::move(y_c), {}, meta);
  split_cohorts(ds);
  return ds;
}

void warn_sizes(const char* recipe, Eigen::Index n, Eigen::Index expect_n,
                Eigen::Index d, Eigen::Index expect_d,
                std::vector<std::string>* warnings) {
  if (!warnings) return;
  if (n != expect_n) {
    warnings->push_back(std::string(recipe) + ": got " + std::to_string(n) +
                        " rows, canonical file yields " +
                        std::to_string(expect_n));
  }
  if (d != expect_d) {
    warnings->push_back(std::string(recipe) + ": got " + std::to_string(d) +
                        " features, canonical manifest yields " +
                        std::to_string(expect_d));
  }
}

}  // namespace

Dataset build_census(const RawTable& raw, const CensusManifest& manifest,
                     std::vector<std::string>* warnings) {
  const Eigen::Index hours = raw.col(manifest.hours_column);
  const Eigen::Index income = raw.col(manifest.income_column);
  const Eigen::Index fertil = raw.col(manifest.fertility_column);
  const Eigen::Index citizen = raw.col(manifest.citizen_column);
  const Eigen::Index age = raw.col(manifest.age_column);
  const bool has_id =
      !manifest.id_column.empty() && raw.has_col(manifest.id_column);
  const Eigen::Index id = has_id ? raw.col(manifest.id_column) : -1;

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < raw.values.rows(); ++i) {
    if (raw.values(i, fertil) >= 1.5 && raw.values(i, citizen) == 0.0 &&
        raw.values(i, age) < 5.0) {
      rows.push_back(i);
    }
  }
  if (rows.empty()) throw SchemaError("census filter kept no rows");

  std::vector<double> hour_values;
  hour_values.reserve(rows.size());
  for (Eigen::Index i : rows) hour_values.push_back(raw.values(i, hours));
  const double hours_median = median_of(hour_values);

  const auto n = static_cast<Eigen::Index>(rows.size());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  VectorXi t(n);
  VectorXd y_r(n), y_c(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    // Strictly more hours than the median; ties are untreated.
    t[k] = raw.values(i, hours) > hours_median ? 1 : 0;
    y_r[k] = raw.values(i, income);
    y_c[k] = -1.0 * (raw.values(i, fertil) - 1.0);  // child count from code
    ids.push_back(has_id ? fmt_real(raw.values(i, id)) : std::to_string(i));
  }

  std::unordered_set<std::string> drop(manifest.drop_columns.begin(),
                                       manifest.drop_columns.end());
  drop.insert(manifest.id_column);
  drop.insert(manifest.hours_column);
  drop.insert(manifest.income_column);
  drop.insert(manifest.fertility_column);
  drop.insert(manifest.citizen_column);
  drop.insert(manifest.age_column);
  std::vector<Eigen::Index> feat_cols;
  for (std::size_t j = 0; j < raw.columns.size(); ++j) {
    if (!drop.count(raw.columns[j])) {
      feat_cols.push_back(static_cast<Eigen::Index>(j));
    }
  }
  if (feat_cols.empty()) throw SchemaError("census manifest drops everything");

  warn_sizes("census", n, kCensusExpectedRows,
             static_cast<Eigen::Index>(feat_cols.size()),
             kCensusExpectedFeatures, warnings);
  return assemble_recipe_dataset(raw, rows, feat_cols, std::move(ids),
                                 std::move(t), std::move(y_r), std::move(y_c),
                                 "census");
}

Dataset build_covtype(const RawTable& raw, const CovtypeManifest& manifest,
                      std::vector<std::string>* warnings) {
  const Eigen::Index elev = raw.col(manifest.elevation_column);
  const Eigen::Index hydro = raw.col(manifest.hydrology_column);
  const Eigen::Index fire = raw.col(manifest.fire_column);
  const Eigen::Index cover = raw.col(manifest.cover_column);

  std::vector<Eigen::Index> typed;
  for (Eigen::Index i = 0; i < raw.values.rows(); ++i) {
    const double c = raw.values(i, cover);
    if (c == manifest.spruce_fir_code || c == manifest.lodgepole_code) {
      typed.push_back(i);
    }
  }
  if (typed.empty()) throw SchemaError("covtype filter kept no rows");

  std::vector<double> elevations;
  elevations.reserve(typed.size());
  for (Eigen::Index i : typed) elevations.push_back(raw.values(i, elev));
  const double elev_median = median_of(elevations);

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i : typed) {
    if (raw.values(i, elev) > elev_median) rows.push_back(i);
  }
  if (rows.empty()) throw SchemaError("covtype elevation filter kept no rows");

  std::vector<double> hydro_values, fire_values;
  hydro_values.reserve(rows.size());
  fire_values.reserve(rows.size());
  for (Eigen::Index i : rows) {
    hydro_values.push_back(raw.values(i, hydro));
    fire_values.push_back(raw.values(i, fire));
  }
  const double hydro_median = median_of(hydro_values);
  const double fire_median = median_of(fire_values);

  const auto n = static_cast<Eigen::Index>(rows.size());
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  VectorXi t(n);
  VectorXd y_r(n), y_c(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index i = rows[static_cast<std::size_t>(k)];
    t[k] = raw.values(i, hydro) < hydro_median ? 1 : 0;
    y_r[k] = raw.values(i, fire) < fire_median ? 1.0 : 0.0;
    y_c[k] = raw.values(i, cover) == manifest.lodgepole_code ? 1.0 : 0.0;
    ids.push_back(std::to_string(i));
  }

  std::unordered_set<std::string> drop(manifest.drop_columns.begin(),
                                       manifest.drop_columns.end());
  drop.insert(manifest.elevation_column);
  drop.insert(manifest.hydrology_column);
  drop.insert(manifest.fire_column);
  drop.insert(manifest.cover_column);
  std::vector<Eigen::Index> feat_cols;
  for (std::size_t j = 0; j < raw.columns.size(); ++j) {
    if (!drop.count(raw.columns[j])) {
      feat_cols.push_back(static_cast<Eigen::Index>(j));
    }
  }
  if (feat_cols.empty()) throw SchemaError("covtype manifest drops everything");

  warn_sizes("covtype", n, kCovtypeExpectedRows,
             static_cast<Eigen::Index>(feat_cols.size()),
             kCovtypeExpectedFeatures, warnings);
  return assemble_recipe_dataset(raw, rows, feat_cols, std::move(ids),
                                 std::move(t), std::move(y_r), std::move(y_c),
                                 "covtype");
}

std::vector<std::string> covtype_column_names() {
  std::vector<std::string> names = {"Elevation",
                                    "Aspect",
                                    "Slope",
                                    "Horizontal_Distance_To_Hydrology",
                                    "Vertical_Distance_To_Hydrology",
                                    "Horizontal_Distance_To_Roadways",
                                    "Hillshade_9am",
                                    "Hillshade_Noon",
                                    "Hillshade_3pm",
                                    "Horizontal_Distance_To_Fire_Points"};
  for (int k = 1; k <= 4; ++k) {
    names.push_back("Wilderness_Area" + std::to_string(k));
  }
  for (int k = 1; k <= 40; ++k) {
    names.push_back("Soil_Type" + std::to_string(k));
  }
  names.push_back("Cover_Type");
  return names;
}

}  // namespace uplift::ingest
