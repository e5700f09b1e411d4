#include "ciftree/losses.hpp"

#include <cmath>
#include <cstdio>

namespace ciftree {

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Full: return "full";
    case LossKind::Ipcw1: return "ipcw1";
    case LossKind::Ipcw2: return "ipcw2";
    case LossKind::BuckleyJames: return "bj";
    case LossKind::DoublyRobust: return "dr";
  }
  return "?";
}

LossKind loss_kind_from_name(const std::string& name) {
  if (name == "full") return LossKind::Full;
  if (name == "ipcw1") return LossKind::Ipcw1;
  if (name == "ipcw2") return LossKind::Ipcw2;
  if (name == "bj") return LossKind::BuckleyJames;
  if (name == "dr") return LossKind::DoublyRobust;
  throw error("unknown loss '" + name + "' (expected full|ipcw1|ipcw2|bj|dr)");
}

void LossStats::check_positivity(LossKind kind) const {
  if (kind == LossKind::Ipcw2 && min_g_ipcw2 < floor) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "t* = t weights hit censoring survival %.6g below floor %.3g; "
                  "shrink the time grid or lower the floor",
                  min_g_ipcw2, floor);
    throw positivity_error(buf);
  }
}

LossStats precompute_stats(const Dataset& data, const CensoringModel& cens,
                           const CifModel& psi, const TimeGrid& grid, int cause,
                           double floor) {
  const int n = data.n();
  const int nj = grid.size();
  LossStats s;
  s.n = n;
  s.cause = cause;
  s.grid = grid;
  s.floor = floor;
  s.tau = choose_tau(cens, data, floor);

  s.delta.resize(n);
  s.event_weight.resize(n);
  s.mart_base.resize(n);
  s.ipcw1_weight.resize(n);
  s.event_by_time.assign(n * nj, 0);
  s.num_point.assign(n * nj, 0.0);
  s.num_mart.assign(n * nj, 0.0);
  s.ipcw2_weight.assign(n * nj, 0.0);
  s.impute.assign(n * nj, 0.0);

  for (int i = 0; i < n; ++i) {
    const Observation& o = data.observations[i];
    std::span<const double> w(o.covariates);
    s.delta[i] = static_cast<std::uint8_t>(o.delta);
    s.event_weight[i] =
        o.delta ? ipcw_weight(cens, o.time, o.delta, std::numeric_limits<double>::infinity(),
                              /*floor=*/0.0)
                : 0.0;
    s.mart_base[i] = martingale_integral(cens, o.time, o.delta, [](double) { return 1.0; });
    s.ipcw1_weight[i] = ipcw_weight(cens, o.time, o.delta, s.tau, floor);

    for (int j = 0; j < nj; ++j) {
      const double tj = grid.times[j];
      const int ij = s.idx(i, j);
      const bool hit = (o.time <= tj && o.cause == cause);
      s.event_by_time[ij] = hit ? 1 : 0;
      s.num_point[ij] = hit ? s.event_weight[i] : 0.0;
      s.num_mart[ij] = martingale_integral(
          cens, o.time, o.delta,
          [&](double u) { return conditional_event_prob(psi, u, tj, cause, w); });
      const double w2 = ipcw_weight(cens, o.time, o.delta, tj, /*floor=*/0.0);
      s.ipcw2_weight[ij] = w2;
      if (w2 > 0.0) s.min_g_ipcw2 = std::min(s.min_g_ipcw2, 1.0 / w2);
      s.impute[ij] = conditional_event_prob(psi, o.time, tj, cause, w);
    }
  }
  return s;
}

namespace {

// Per-kind minimizer from accumulated sums. The augmented and imputation
// losses divide by the member count (their quadratic coefficients sum to the
// count up to the normalization identity); the weighted losses divide by the
// summed weights.
double minimizer(LossKind kind, double sum_b, double sum_c, int count, bool* ok) {
  if (kind == LossKind::Ipcw1 || kind == LossKind::Ipcw2) {
    if (sum_c <= 0.0) {
      *ok = false;
      return 0.0;
    }
    return sum_b / sum_c;
  }
  return sum_b / count;
}

}  // namespace

NodeEstimate node_estimate(const LossStats& stats, const std::vector<int>& members,
                           LossKind kind) {
  if (members.empty()) throw error("node estimate on empty member set");
  const int nj = stats.grid.size();
  NodeEstimate est;
  est.n_members = static_cast<int>(members.size());
  est.cif.assign(nj, 0.0);
  est.loss_contribution.assign(nj, 0.0);
  for (int j = 0; j < nj; ++j) {
    double sa = 0.0, sb = 0.0, sc = 0.0;
    for (int i : members) {
      double a, b, c;
      stats.coeffs(kind, i, j, a, b, c);
      sa += a;
      sb += b;
      sc += c;
    }
    bool ok = true;
    const double beta = minimizer(kind, sb, sc, est.n_members, &ok);
    if (!ok) est.estimable = false;
    est.cif[j] = beta;
    est.loss_contribution[j] =
        stats.grid.weights[j] * (sa - 2.0 * beta * sb + beta * beta * sc) / stats.n;
  }
  return est;
}

double node_loss(const LossStats& stats, const std::vector<int>& members,
                 const NodeEstimate& estimate, LossKind kind) {
  const int nj = stats.grid.size();
  double total = 0.0;
  for (int j = 0; j < nj; ++j) {
    const double beta = estimate.cif[j];
    double sa = 0.0, sb = 0.0, sc = 0.0;
    for (int i : members) {
      double a, b, c;
      stats.coeffs(kind, i, j, a, b, c);
      sa += a;
      sb += b;
      sc += c;
    }
    total += stats.grid.weights[j] * (sa - 2.0 * beta * sb + beta * beta * sc);
  }
  return total / stats.n;
}

double split_gain(const Dataset& data, const LossStats& stats,
                  const std::vector<int>& members, int covariate, double cut,
                  LossKind kind) {
  std::vector<int> left, right;
  left.reserve(members.size());
  right.reserve(members.size());
  for (int i : members) {
    (data.covariate(i, covariate) <= cut ? left : right).push_back(i);
  }
  if (left.empty() || right.empty()) return 0.0;
  const NodeEstimate parent = node_estimate(stats, members, kind);
  const NodeEstimate le = node_estimate(stats, left, kind);
  const NodeEstimate re = node_estimate(stats, right, kind);
  return node_loss(stats, members, parent, kind) - node_loss(stats, left, le, kind) -
         node_loss(stats, right, re, kind);
}

double observation_risk(const LossStats& stats, int i, const std::vector<double>& pred,
                        LossKind kind) {
  double total = 0.0;
  for (int j = 0; j < stats.grid.size(); ++j) {
    double a, b, c;
    stats.coeffs(kind, i, j, a, b, c);
    const double p = pred[j];
    total += stats.grid.weights[j] * (a - 2.0 * p * b + p * p * c);
  }
  return total;
}

}  // namespace ciftree
