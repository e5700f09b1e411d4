#pragma once

// Brute-force reference implementations used only by the test suites: losses
// evaluated by literal double summation, split search by full recomputation,
// martingale sums by direct scans over the fitted curve. Nothing here calls
// into the sufficient-statistic or prefix-sum paths it is meant to check.

#include <optional>
#include <utility>
#include <vector>

#include "ciftree/censoring.hpp"
#include "ciftree/cif_models.hpp"
#include "ciftree/losses.hpp"
#include "ciftree/tree.hpp"

namespace ciftree::oracle {

struct OracleContext {
  const Dataset& data;
  const CensoringModel& cens;
  const CifModel& psi;
  TimeGrid grid;
  int cause = 1;
  double tau = std::numeric_limits<double>::infinity();  // horizon for t* = tau weights
};

struct OracleReport {
  std::string quantity;
  double fast = 0.0;
  double oracle = 0.0;
  double abs_dev = 0.0;
  double rel_dev = 0.0;
};

// Node value (the loss minimizer) per grid time, computed by the direct
// route: weighted ratios for the weighted losses, and for the augmented loss
// the ratio of summed numerator terms to summed denominator terms rather
// than the count-normalized form.
std::vector<double> naive_node_value(const OracleContext& ctx, const std::vector<int>& members,
                                     LossKind kind);

// Composite loss contribution of one member set at the given values,
// literal per-observation summation, normalized by the full sample size.
double naive_node_loss(const OracleContext& ctx, const std::vector<int>& members,
                       const std::vector<double>& values, LossKind kind);

// Total loss of an explicit partition: node_of[i] assigns observations to
// nodes, values[node] holds each node's per-grid-time value.
double naive_loss(const OracleContext& ctx, const std::vector<int>& node_of,
                  const std::vector<std::vector<double>>& values, LossKind kind);

struct BestSplit {
  int covariate = -1;
  double cut = 0.0;
  double gain = 0.0;
};

// Every covariate, every midpoint between distinct consecutive values, full
// recomputation of both children; same admissibility gates and tie rule as
// the fast engine.
std::optional<BestSplit> exhaustive_best_split(const OracleContext& ctx,
                                               const std::vector<int>& members, LossKind kind,
                                               int minbucket, bool uncensored_only);

// Recursive exhaustive tree growth; returns the preorder structure as
// (covariate, cut) pairs with covariate = -1 for leaves.
std::vector<std::pair<int, double>> exhaustive_grow(const OracleContext& ctx,
                                                    std::vector<int> members, LossKind kind,
                                                    int minbucket, int minsplit, int max_depth,
                                                    bool uncensored_only);

// Preorder structure of a fast-engine tree, comparable with exhaustive_grow.
std::vector<std::pair<int, double>> tree_structure(const Tree& tree);

// Single-time augmented loss totals: the t* = infinity weighted loss plus
// the augmentation over [0, T~], or the t* = t form plus the augmentation
// truncated at min(T~, t). The two agree pathwise for continuous data.
double augmented_loss(const OracleContext& ctx, const std::vector<int>& node_of,
                      const std::vector<std::vector<double>>& values, double t, bool modified);

// Pathwise discrepancy between the two augmented losses for observation i at
// horizon t and node value beta; zero (to rounding) for tie-free data.
double omega_term(const OracleContext& ctx, int i, double t, double beta);

// Max |omega| over all observations; throws when the data contain ties or
// some follow-up time equals t (the continuity assumption is violated).
OracleReport pathwise_a1_check(const OracleContext& ctx, double t, double beta);

}  // namespace ciftree::oracle
