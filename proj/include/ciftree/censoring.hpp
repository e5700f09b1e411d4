#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "ciftree/data.hpp"

namespace ciftree {

// Product-limit estimate of the censoring survival function G(s) = P(C >= s),
// obtained by treating censorings as events and events as censorings.
//
// Discrete-time conventions, chosen so that the per-observation normalization
// identity (event weight plus martingale mass equals one) holds exactly:
//   * weights evaluate G at the left limit, survival(s-) = prod_{u_k < s}(1 - h_k),
//     matching P(C >= s);
//   * martingale increments at a jump u_k divide by the post-jump value
//     survival(u_k) = prod_{u_j <= u_k}(1 - h_j);
//   * at tied times events precede censorings, so a subject failing at u_k is
//     not at risk of censoring at u_k.
struct CensoringModel {
  std::vector<double> jump_times;         // censoring jump times, increasing
  std::vector<double> survival;           // post-jump values  prod_{j<=k}(1-h_j)
  std::vector<double> hazard_increments;  // h_k = d_k / r_k
  std::vector<int> n_at_risk;             // r_k, events at u_k already removed

  // survival(s-) when left_limit, survival(s) otherwise; 1 before all jumps
  // and the final plateau value (possibly 0) afterwards.
  double survival_at(double s, bool left_limit) const {
    auto it = left_limit
                  ? std::lower_bound(jump_times.begin(), jump_times.end(), s)
                  : std::upper_bound(jump_times.begin(), jump_times.end(), s);
    auto k = it - jump_times.begin();
    return k == 0 ? 1.0 : survival[k - 1];
  }

  // Index of the jump at exactly time s, or -1.
  int jump_index(double s) const {
    auto it = std::lower_bound(jump_times.begin(), jump_times.end(), s);
    if (it != jump_times.end() && *it == s) return static_cast<int>(it - jump_times.begin());
    return -1;
  }

  // G == 1 everywhere (no censoring model); plugging this into the augmented
  // loss machinery yields the Buckley-James special case.
  static CensoringModel unit() { return CensoringModel{}; }
};

CensoringModel fit_km(const Dataset& data);

// Delta_i(t*) / G(min(T~_i, t*)-) with Delta_i(t*) = 1 iff the subject failed
// or was still under observation at t*. Throws positivity_error when the
// denominator is below `floor` (pass floor = 0 to disable the check).
double ipcw_weight(const CensoringModel& model, double time, int delta, double t_star,
                   double floor = 0.05);

// Largest truncation horizon tau such that G(min(T~_i, tau)-) >= floor for
// every subject; +infinity when no truncation is needed.
double choose_tau(const CensoringModel& model, const Dataset& data, double floor = 0.05);

// Integral of h against dM_G/G over [0, T~] for one subject, where M_G is the
// censoring martingale. The counting-measure mass sits at the subject's own
// censoring time whether or not the model has a jump there; the compensator
// contributes -h_k at every model jump the subject is at risk for. At the
// subject's own jump the two masses combine to (1 - h_k)/S_k = 1/S_{k-1},
// which stays finite even at a terminal jump with hazard one.
template <class F>
double martingale_integral(const CensoringModel& model, double time, int delta, F&& h) {
  double acc = 0.0;
  bool own_jump_seen = false;
  const size_t m = model.jump_times.size();
  for (size_t k = 0; k < m && model.jump_times[k] <= time; ++k) {
    const double u = model.jump_times[k];
    if (delta == 0 && time == u) {
      acc += h(u) / (k > 0 ? model.survival[k - 1] : 1.0);
      own_jump_seen = true;
    } else if (time > u) {
      acc -= h(u) * model.hazard_increments[k] / model.survival[k];
    }
    // Events tied with a censoring jump left the risk set first: no term.
  }
  if (delta == 0 && !own_jump_seen) {
    // Model without a jump at this censoring time (e.g. the unit model).
    acc += h(time) / model.survival_at(time, false);
  }
  return acc;
}

// KM curve as (time, survival) rows for external plotting.
void save_censoring_curve_csv(const CensoringModel& model, const std::string& path);

}  // namespace ciftree
