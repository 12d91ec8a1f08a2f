#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "upliftrank/barrier.hpp"
#include "upliftrank/core.hpp"
#include "upliftrank/ingest.hpp"

namespace uplift::sim {

struct CycleConfig {
  Eigen::Index population_size = 0;
  double explore_fraction = 0.2;
  double treat_prob_explore = 0.5;
  barrier::Constraint exploit_cutoff = barrier::Constraint::make_percentage(0.4);
  double exploit_treat_prob = 0.5;
  RngSeed seed;

  void validate() const;
};

/// A named scoring function over feature rows.
struct ScorerHandle {
  std::string id;
  std::function<VectorXd(const MatrixXd&)> score;
};

/// One cycle's logged rows in the experiment-table shape, with the arm label
/// ("explore" or a model id) per row.
struct ExperimentLog {
  Dataset ds;
  std::vector<std::string> arm;
  int cycle = 0;
};

struct Population {
  MatrixXd x;
  ingest::GroundTruth gt;
};

/// Features plus noiseless ground truth; treatment and outcomes are assigned
/// per cycle.
Population make_population(const ingest::SyntheticConfig& cfg, RngSeed seed);

/// Runs one explore/exploit cycle: a fixed-size uniform explore sample with
/// Bernoulli treatment, then each model's exploit arm selecting its top
/// non-explore users under the cutoff (arms are mutually disjoint, allocated
/// in model order), randomized treatment within each arm, and outcomes
/// realized from the shared outcome model. A budget cutoff accumulates the
/// true expected incremental cost along the score ranking.
ExperimentLog run_cycle(const Population& pop,
                        const ingest::SyntheticConfig& outcome_model,
                        const std::vector<ScorerHandle>& models,
                        const CycleConfig& cfg);

struct ArmMetrics {
  double r = 0.0;
  double gain = 0.0;  // relative to the explore arm; 0 for explore itself
};

/// Slope R per arm and efficiency gain of each exploit arm against explore.
std::map<std::string, ArmMetrics> evaluate_cycle(const ExperimentLog& log);

/// Native CSV columns plus cycle and arm.
void write_log_csv(const std::vector<ExperimentLog>& logs,
                   const std::string& path);

}  // namespace uplift::sim
