#pragma once

#include <cstdint>
#include <vector>

#include "ciftree/censoring.hpp"
#include "ciftree/cif_models.hpp"
#include "ciftree/data.hpp"

namespace ciftree {

enum class LossKind { Full, Ipcw1, Ipcw2, BuckleyJames, DoublyRobust };

const char* loss_kind_name(LossKind kind);
LossKind loss_kind_from_name(const std::string& name);

// Per-observation sufficient statistics for every loss family, computed once
// per (dataset, censoring model, CIF model, grid, cause) and independent of
// any partition. With these in hand, each observation's contribution to any
// node loss is the quadratic  a - 2 b beta + c beta^2  in the node value beta,
// so node losses, minimizers and split gains reduce to running sums.
struct LossStats {
  int n = 0;
  int cause = 1;
  TimeGrid grid;
  double tau = 0.0;              // truncation horizon used by the t* = tau weights
  double floor = 0.05;
  double min_g_ipcw2 = 1.0;      // smallest G(s-) hit by a nonzero t* = t_j weight

  std::vector<std::uint8_t> delta;       // n
  std::vector<double> event_weight;      // n:   delta / G(T~ -)
  std::vector<double> mart_base;         // n:   integral of dM_G / G over [0, T~]
  std::vector<double> ipcw1_weight;      // n:   weight at t* = tau

  // n x J, row-major (index i * J + j).
  std::vector<std::uint8_t> event_by_time;  // 1{T~ <= t_j, M = cause}
  std::vector<double> num_point;            // event_by_time * event_weight
  std::vector<double> num_mart;             // integral of y(u; t_j)/G dM_G
  std::vector<double> ipcw2_weight;         // weight at t* = t_j
  std::vector<double> impute;               // y(T~; t_j), the censored-value fill-in

  int idx(int i, int j) const { return i * grid.size() + j; }

  // Quadratic coefficients of observation i at grid point j under `kind`.
  void coeffs(LossKind kind, int i, int j, double& a, double& b, double& c) const {
    const int ij = idx(i, j);
    switch (kind) {
      case LossKind::Full: {
        a = b = event_by_time[ij];
        c = 1.0;
        return;
      }
      case LossKind::Ipcw1: {
        const double w = ipcw1_weight[i];
        a = b = event_by_time[ij] ? w : 0.0;
        c = w;
        return;
      }
      case LossKind::Ipcw2: {
        const double w = ipcw2_weight[ij];
        a = b = event_by_time[ij] ? w : 0.0;
        c = w;
        return;
      }
      case LossKind::BuckleyJames: {
        a = b = delta[i] ? static_cast<double>(event_by_time[ij]) : impute[ij];
        c = 1.0;
        return;
      }
      case LossKind::DoublyRobust: {
        a = b = num_point[ij] + num_mart[ij];
        c = event_weight[i] + mart_base[i];
        return;
      }
    }
  }

  // Throws positivity_error when the configured kind relies on weights whose
  // denominators dipped below the floor (only t* = t_j weights can; the
  // t* = tau weights respect the floor by construction of tau).
  void check_positivity(LossKind kind) const;
};

LossStats precompute_stats(const Dataset& data, const CensoringModel& cens,
                           const CifModel& psi, const TimeGrid& grid, int cause,
                           double floor = 0.05);

// Node-level estimate: the estimated cause-specific CIF at each grid time
// (unclamped; values outside [0,1] are possible for the augmented losses and
// are clipped only when predictions are emitted) plus the node's share of the
// total composite loss.
struct NodeEstimate {
  std::vector<double> cif;                // per grid time, unclamped
  std::vector<double> loss_contribution;  // per grid time, includes w_j and 1/n
  int n_members = 0;
  bool estimable = true;

  double clamped(int j) const {
    double v = cif[j];
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
};

NodeEstimate node_estimate(const LossStats& stats, const std::vector<int>& members,
                           LossKind kind);

// Composite loss contribution of one node at the supplied estimate,
// sum_j w_j sum_{i in node} (a - 2 b cif_j + c cif_j^2) / n.
double node_loss(const LossStats& stats, const std::vector<int>& members,
                 const NodeEstimate& estimate, LossKind kind);

// Parent loss minus the sum of both children's losses, each child evaluated
// at its own minimizer. Observations with covariate <= cut go left.
double split_gain(const Dataset& data, const LossStats& stats,
                  const std::vector<int>& members, int covariate, double cut,
                  LossKind kind);

// Per-observation composite risk contribution at an externally supplied
// prediction (the held-out cross-validation summand).
double observation_risk(const LossStats& stats, int i, const std::vector<double>& pred,
                        LossKind kind);

}  // namespace ciftree
