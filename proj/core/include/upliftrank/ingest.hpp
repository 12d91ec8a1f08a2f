#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "upliftrank/core.hpp"

namespace uplift::ingest {

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const;  // each in (0,1), sum 1 within 1e-9
};

/// Maps dataset roles to CSV column names. An empty feature list means
/// "every remaining column, in header order"; an empty id or strategy name
/// means the column is absent and defaulted.
struct CsvSchema {
  std::string id = "id";
  std::string strategy = "strategy";
  std::string t = "t";
  std::string y_r = "y_r";
  std::string y_c = "y_c";
  std::vector<std::string> features;

  static CsvSchema native() { return {}; }
};

/// Reads a UTF-8, header-row CSV into a Dataset. Rows with unparsable or
/// missing outcome values are rejected with ParseError (no imputation);
/// missing mapped columns raise SchemaError; a single-cohort file raises
/// EmptyCohortError.
Dataset load_csv(const std::string& path,
                 const CsvSchema& schema = CsvSchema::native());

/// Writes the native format: id,strategy,t,y_r,y_c,f0..f{d-1} with reals at
/// 12 significant digits.
void write_csv(const Dataset& ds, const std::string& path);

struct SplitResult {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Seeded permutation followed by contiguous cuts at floor(n*train) and
/// floor(n*(train+val)). Throws EmptyCohortError if any part loses a cohort.
SplitResult split_dataset(const Dataset& ds, const SplitRatios& r,
                          RngSeed seed);

enum class TauForm { kLinear, kLinearPlusSine, kSoftplus };

/// True conditional-effect function: w.x + b, optionally plus sin(x_0), or
/// softplus(w.x + b) for a positive effect.
struct TauSpec {
  VectorXd w;
  double b = 0.0;
  TauForm form = TauForm::kLinear;

  double evaluate(const Eigen::Ref<const VectorXd>& x) const;
};

struct LinearSpec {
  VectorXd w;
  double b = 0.0;

  double evaluate(const Eigen::Ref<const VectorXd>& x) const;
};

/// Constant treatment probability, or logistic in the features.
struct PropensitySpec {
  bool logistic = false;
  double e = 0.5;  // constant case, must lie in [0.05, 0.95]
  VectorXd w;      // logistic case
  double b = 0.0;

  double evaluate(const Eigen::Ref<const VectorXd>& x) const;
};

struct SyntheticConfig {
  Eigen::Index n = 0;
  int d = 1;
  PropensitySpec treat_prob;
  double noise_sd = 0.0;
  TauSpec tau_r;
  TauSpec tau_c;
  LinearSpec mu0_r;
  LinearSpec mu0_c;

  void validate() const;

  /// Documented default: linear baselines, tau_r = w.x + sin(x_0),
  /// tau_c softplus-shaped (positive, heterogeneous).
  static SyntheticConfig defaults(Eigen::Index n, int d);
};

struct GroundTruth {
  VectorXd tau_r_true;
  VectorXd tau_c_true;
  VectorXd propensity_true;
};

MatrixXd draw_features(Eigen::Index n, int d, Rng& rng);
GroundTruth evaluate_ground_truth(const SyntheticConfig& cfg,
                                  const MatrixXd& X);

/// Outcome model shared with the simulator:
/// y = mu0(x) + t * tau(x) + noise_sd * N(0,1), for both outcomes.
void realize_outcomes(const SyntheticConfig& cfg, const MatrixXd& X,
                      const VectorXi& t, Rng& rng, VectorXd* y_r,
                      VectorXd* y_c);

/// Features ~ N(0, I), T ~ Bernoulli(e(x)), outcomes from the model above.
std::pair<Dataset, GroundTruth> generate_synthetic(const SyntheticConfig& cfg,
                                                   RngSeed seed);

void write_groundtruth_csv(const GroundTruth& gt, const std::string& path);
GroundTruth load_groundtruth_csv(const std::string& path);

/// All-numeric table with named columns, the raw input of the public-dataset
/// recipes.
struct RawTable {
  std::vector<std::string> columns;
  MatrixXd values;

  Eigen::Index col(const std::string& name) const;  // SchemaError if absent
  bool has_col(const std::string& name) const;
};

/// Reads a numeric CSV. With `names` empty the first row must be a header;
/// otherwise the file is headerless and `names` supplies the columns.
RawTable load_raw_table(const std::string& path,
                        std::vector<std::string> names = {});

/// Keep a seeded row subsample of a raw table (for bounded-runtime runs).
RawTable subsample_rows(const RawTable& raw, Eigen::Index keep, RngSeed seed);

/// Editable recipe for the census construction. The retained feature set is
/// "all columns except drop_columns"; the published recipe does not pin the
/// exact list, so the default is a documented approximation.
struct CensusManifest {
  std::string id_column = "caseid";
  std::string hours_column = "dHours";
  std::string income_column = "dIncome1";
  std::string fertility_column = "iFertil";
  std::string citizen_column = "iCitizen";
  std::string age_column = "dAge";
  std::vector<std::string> drop_columns;

  static CensusManifest defaults();
  static CensusManifest from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct CovtypeManifest {
  std::string elevation_column = "Elevation";
  std::string hydrology_column = "Horizontal_Distance_To_Hydrology";
  std::string fire_column = "Horizontal_Distance_To_Fire_Points";
  std::string cover_column = "Cover_Type";
  double spruce_fir_code = 1.0;
  double lodgepole_code = 2.0;
  std::vector<std::string> drop_columns;

  static CovtypeManifest defaults();
  static CovtypeManifest from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Expected sizes on the canonical raw files; mismatches are reported as
/// warnings, not errors.
inline constexpr Eigen::Index kCensusExpectedRows = 225814;
inline constexpr int kCensusExpectedFeatures = 46;
inline constexpr Eigen::Index kCovtypeExpectedRows = 244365;
inline constexpr int kCovtypeExpectedFeatures = 51;

/// Filters to parents born in the U.S. under 50, treats working more hours
/// than the filtered-population median, with income as the value outcome and
/// negative child count as the cost outcome.
Dataset build_census(const RawTable& raw,
                     const CensusManifest& manifest = CensusManifest::defaults(),
                     std::vector<std::string>* warnings = nullptr);

/// Keeps Spruce-Fir and Lodgepole Pine above the median elevation; treatment
/// is proximity to hydrology, value is proximity to fire ignition points,
/// cost is the Lodgepole Pine indicator.
Dataset build_covtype(const RawTable& raw,
                      const CovtypeManifest& manifest =
                          CovtypeManifest::defaults(),
                      std::vector<std::string>* warnings = nullptr);

/// Canonical 55 column names of the headerless covtype.data file.
std::vector<std::string> covtype_column_names();

}  // namespace uplift::ingest
