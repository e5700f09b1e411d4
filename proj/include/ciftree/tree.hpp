#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ciftree/losses.hpp"

namespace ciftree {

// Whether minsplit/minbucket count every observation or only uncensored
// ones. The weighted losses gate on uncensored counts so that no node can
// lose all of its positive-weight members.
enum class CountMode { AllObs, UncensoredOnly };

enum class SelectRule { MinRisk, OneSE };

struct FitConfig {
  LossKind loss = LossKind::DoublyRobust;
  int cause = 1;
  TimeGrid grid;

  int minbucket = 10;
  int minsplit = 30;
  int max_depth = 30;

  int cv_folds = 10;
  int cv_repeats = 1;
  std::uint64_t seed = 1;

  double floor = 0.05;
  bool geometric_alpha = true;        // evaluate CV at geometric means of critical alphas
  bool refit_nuisance_per_fold = false;
  bool isotonic = false;              // pool-adjacent-violators on predictions
  SelectRule select_rule = SelectRule::MinRisk;
  std::optional<CountMode> count_mode;  // derived from the loss when unset

  CountMode effective_count_mode() const {
    if (count_mode) return *count_mode;
    return (loss == LossKind::Ipcw1 || loss == LossKind::Ipcw2) ? CountMode::UncensoredOnly
                                                                : CountMode::AllObs;
  }
};

struct TreeNode {
  int covariate = -1;  // -1 marks a leaf
  double cut = 0.0;
  int left = -1;
  int right = -1;
  int depth = 0;
  NodeEstimate estimate;

  bool is_leaf() const { return covariate < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // preorder, root at 0
  LossKind loss = LossKind::DoublyRobust;
  int cause = 1;
  TimeGrid grid;
  std::vector<std::string> covariate_names;
  double tau = 0.0;
  bool isotonic = false;

  int n_leaves() const;
  // Index of the leaf w falls into; ties on a cut go left.
  int leaf_for(std::span<const double> w) const;
  // CIF values at the grid times, clamped to [0,1] (isotonic when enabled).
  std::vector<double> predict(std::span<const double> w) const;
  // Unclamped leaf values, as used inside loss evaluation.
  const std::vector<double>& predict_raw(std::span<const double> w) const;
  // Distinct covariate indices appearing in splits.
  std::vector<int> split_covariates() const;
};

// One candidate subtree on the cost-complexity path: the set of internal
// nodes collapsed to leaves, its critical penalty and training loss, and the
// cross-validated risk once filled in.
struct PathEntry {
  double alpha = 0.0;
  std::vector<std::uint8_t> collapsed;  // per node id of the maximal tree
  int n_leaves = 0;
  double train_loss = 0.0;
  double cv_risk = std::numeric_limits<double>::quiet_NaN();
  double cv_se = std::numeric_limits<double>::quiet_NaN();
};

struct PrunePath {
  std::vector<PathEntry> entries;  // alpha strictly increasing; last is root-only
  // Entry optimal for penalty alpha: the last critical value <= alpha.
  int entry_for_alpha(double alpha) const;
};

Tree grow(const Dataset& data, const LossStats& stats, const FitConfig& config);
Tree grow(const Dataset& data, const LossStats& stats, const FitConfig& config,
          const std::vector<int>& members);

PrunePath prune_path(const Tree& tree, const FitConfig& config);

// Materialize the subtree described by a path entry (nodes reindexed).
Tree prune_to(const Tree& tree, const PathEntry& entry);

// Fill cv_risk/cv_se for every path entry by Q-fold cross-validation:
// per fold, grow and prune on the complement, score held-out observations
// with the per-observation risk at each penalty evaluation point. Held-out
// risks always use the full-sample statistics; refit_nuisance_per_fold only
// changes how the fold trees are built.
void cross_validate(const Dataset& data, const CifModel& psi, const LossStats& stats,
                    const FitConfig& config, PrunePath& path);

int select(const PrunePath& path, SelectRule rule);

struct FitResult {
  Tree maximal;
  PrunePath path;
  int selected = 0;
  Tree tree;  // final selected subtree
  double tau = 0.0;
};

// Full pipeline: censoring fit, sufficient statistics, growth, pruning path,
// cross-validated selection.
FitResult fit(const Dataset& data, const CifModel& psi, const FitConfig& config);

// JSON document I/O (schema tag "ciftree-tree-v1").
std::string tree_to_json(const Tree& tree, std::uint64_t seed,
                         const std::string& flags_summary);
Tree tree_from_json(const std::string& text);

// Nondecreasing projection (pool adjacent violators, uniform weights).
std::vector<double> isotonic_fit(const std::vector<double>& values);

}  // namespace ciftree
