#include "ciftree/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace ciftree::oracle {

namespace {

// Curve lookups by linear scan over the fitted arrays.
double g_before(const CensoringModel& m, double s) {
  double g = 1.0;
  for (size_t k = 0; k < m.jump_times.size() && m.jump_times[k] < s; ++k) g = m.survival[k];
  return g;
}

double g_through(const CensoringModel& m, double s) {
  double g = 1.0;
  for (size_t k = 0; k < m.jump_times.size() && m.jump_times[k] <= s; ++k) g = m.survival[k];
  return g;
}

double weight_at(const OracleContext& ctx, int i, double t_star) {
  const Observation& o = ctx.data.observations[i];
  const bool complete = (o.delta == 1) || (o.time >= t_star);
  if (!complete) return 0.0;
  return 1.0 / g_before(ctx.cens, std::min(o.time, t_star));
}

int z_tilde(const OracleContext& ctx, int i, double t) {
  const Observation& o = ctx.data.observations[i];
  return (o.time <= t && o.cause == ctx.cause) ? 1 : 0;
}

double y_at(const OracleContext& ctx, int i, double u, double t) {
  return conditional_event_prob(ctx.psi, u, t, ctx.cause,
                                ctx.data.observations[i].covariates);
}

// Integral of v against dM_G/G for observation i over (lo, hi]; the counting
// measure puts unit mass at the subject's own censoring time, the compensator
// minus the hazard increment at every jump the subject is at risk for (events
// leave the censoring risk set first at ties). At the subject's own jump the
// two masses combine to (1 - h_k)/S_k = 1/S_{k-1}, finite even when h_k = 1.
template <class F>
double mart_sum(const OracleContext& ctx, int i, double lo, double hi, F&& v) {
  const Observation& o = ctx.data.observations[i];
  const CensoringModel& m = ctx.cens;
  const double top = std::min(hi, o.time);
  double acc = 0.0;
  bool own_jump = false;
  for (size_t k = 0; k < m.jump_times.size(); ++k) {
    const double u = m.jump_times[k];
    if (u <= lo) continue;
    if (u > top) break;
    if (o.delta == 0 && o.time == u) {
      acc += v(u) / (k > 0 ? m.survival[k - 1] : 1.0);
      own_jump = true;
    } else if (o.time > u) {
      acc -= v(u) * m.hazard_increments[k] / m.survival[k];
    }
  }
  if (o.delta == 0 && !own_jump && o.time > lo && o.time <= hi) {
    acc += v(o.time) / g_through(m, o.time);
  }
  return acc;
}

// Literal per-observation loss contribution at one grid time.
double obs_loss(const OracleContext& ctx, int i, double t, double beta, LossKind kind) {
  const Observation& o = ctx.data.observations[i];
  const double z = z_tilde(ctx, i, t);
  const double sq = (z - beta) * (z - beta);
  switch (kind) {
    case LossKind::Full:
      return sq;
    case LossKind::Ipcw1:
      return weight_at(ctx, i, ctx.tau) * sq;
    case LossKind::Ipcw2:
      return weight_at(ctx, i, t) * sq;
    case LossKind::BuckleyJames: {
      if (o.delta == 1) return sq;
      const double y = y_at(ctx, i, o.time, t);
      return y - 2.0 * beta * y + beta * beta;
    }
    case LossKind::DoublyRobust: {
      const double point = (o.delta == 1) ? sq / g_before(ctx.cens, o.time) : 0.0;
      const double inf = std::numeric_limits<double>::infinity();
      const double aug = mart_sum(ctx, i, 0.0, inf, [&](double u) {
        const double y = y_at(ctx, i, u, t);
        return y - 2.0 * beta * y + beta * beta;
      });
      return point + aug;
    }
  }
  return 0.0;
}

int eligible(const OracleContext& ctx, const std::vector<int>& members, bool uncensored_only) {
  if (!uncensored_only) return static_cast<int>(members.size());
  int k = 0;
  for (int i : members) k += ctx.data.observations[i].delta;
  return k;
}

}  // namespace

std::vector<double> naive_node_value(const OracleContext& ctx, const std::vector<int>& members,
                                     LossKind kind) {
  const int nj = ctx.grid.size();
  std::vector<double> values(nj, 0.0);
  for (int j = 0; j < nj; ++j) {
    const double t = ctx.grid.times[j];
    double num = 0.0, den = 0.0;
    for (int i : members) {
      const Observation& o = ctx.data.observations[i];
      switch (kind) {
        case LossKind::Full:
          num += z_tilde(ctx, i, t);
          den += 1.0;
          break;
        case LossKind::Ipcw1:
        case LossKind::Ipcw2: {
          const double w = weight_at(ctx, i, kind == LossKind::Ipcw1 ? ctx.tau : t);
          num += w * z_tilde(ctx, i, t);
          den += w;
          break;
        }
        case LossKind::BuckleyJames:
          num += o.delta == 1 ? z_tilde(ctx, i, t) : y_at(ctx, i, o.time, t);
          den += 1.0;
          break;
        case LossKind::DoublyRobust: {
          const double inf = std::numeric_limits<double>::infinity();
          const double w = (o.delta == 1) ? 1.0 / g_before(ctx.cens, o.time) : 0.0;
          num += w * z_tilde(ctx, i, t) +
                 mart_sum(ctx, i, 0.0, inf, [&](double u) { return y_at(ctx, i, u, t); });
          den += w + mart_sum(ctx, i, 0.0, inf, [](double) { return 1.0; });
          break;
        }
      }
    }
    values[j] = den != 0.0 ? num / den : 0.0;
  }
  return values;
}

double naive_node_loss(const OracleContext& ctx, const std::vector<int>& members,
                       const std::vector<double>& values, LossKind kind) {
  double total = 0.0;
  for (int j = 0; j < ctx.grid.size(); ++j) {
    double sum = 0.0;
    for (int i : members) sum += obs_loss(ctx, i, ctx.grid.times[j], values[j], kind);
    total += ctx.grid.weights[j] * sum;
  }
  return total / ctx.data.n();
}

double naive_loss(const OracleContext& ctx, const std::vector<int>& node_of,
                  const std::vector<std::vector<double>>& values, LossKind kind) {
  double total = 0.0;
  for (int j = 0; j < ctx.grid.size(); ++j) {
    double sum = 0.0;
    for (int i = 0; i < ctx.data.n(); ++i) {
      sum += obs_loss(ctx, i, ctx.grid.times[j], values[node_of[i]][j], kind);
    }
    total += ctx.grid.weights[j] * sum;
  }
  return total / ctx.data.n();
}

std::optional<BestSplit> exhaustive_best_split(const OracleContext& ctx,
                                               const std::vector<int>& members, LossKind kind,
                                               int minbucket, bool uncensored_only) {
  const double parent_loss = naive_node_loss(ctx, members, naive_node_value(ctx, members, kind),
                                             kind);
  const double gain_tol = 1e-10 * std::max(1.0, std::abs(parent_loss));
  BestSplit best;
  bool found = false;
  for (int k = 0; k < ctx.data.n_covariates(); ++k) {
    std::vector<double> vals;
    vals.reserve(members.size());
    for (int i : members) vals.push_back(ctx.data.covariate(i, k));
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (size_t v = 0; v + 1 < vals.size(); ++v) {
      const double cut = 0.5 * (vals[v] + vals[v + 1]);
      std::vector<int> left, right;
      for (int i : members) {
        (ctx.data.covariate(i, k) <= cut ? left : right).push_back(i);
      }
      if (eligible(ctx, left, uncensored_only) < minbucket ||
          eligible(ctx, right, uncensored_only) < minbucket) {
        continue;
      }
      const double ll = naive_node_loss(ctx, left, naive_node_value(ctx, left, kind), kind);
      const double rl = naive_node_loss(ctx, right, naive_node_value(ctx, right, kind), kind);
      const double gain = parent_loss - ll - rl;
      if (gain > gain_tol && (!found || gain > best.gain)) {
        best = {k, cut, gain};
        found = true;
      }
    }
  }
  if (!found) return std::nullopt;
  return best;
}

std::vector<std::pair<int, double>> exhaustive_grow(const OracleContext& ctx,
                                                    std::vector<int> members, LossKind kind,
                                                    int minbucket, int minsplit, int max_depth,
                                                    bool uncensored_only) {
  std::vector<std::pair<int, double>> structure;
  struct Rec {
    const OracleContext& ctx;
    LossKind kind;
    int minbucket, minsplit, max_depth;
    bool uncensored_only;
    std::vector<std::pair<int, double>>& out;
    void build(std::vector<int> mem, int depth) {
      const bool can_split =
          eligible(ctx, mem, uncensored_only) >= minsplit && depth < max_depth;
      std::optional<BestSplit> cand;
      if (can_split) cand = exhaustive_best_split(ctx, mem, kind, minbucket, uncensored_only);
      if (!cand) {
        out.emplace_back(-1, 0.0);
        return;
      }
      out.emplace_back(cand->covariate, cand->cut);
      std::vector<int> left, right;
      for (int i : mem) {
        (ctx.data.covariate(i, cand->covariate) <= cand->cut ? left : right).push_back(i);
      }
      build(std::move(left), depth + 1);
      build(std::move(right), depth + 1);
    }
  };
  Rec rec{ctx, kind, minbucket, minsplit, max_depth, uncensored_only, structure};
  rec.build(std::move(members), 0);
  return structure;
}

std::vector<std::pair<int, double>> tree_structure(const Tree& tree) {
  std::vector<std::pair<int, double>> out;
  out.reserve(tree.nodes.size());
  for (const TreeNode& nd : tree.nodes) {
    out.emplace_back(nd.covariate, nd.is_leaf() ? 0.0 : nd.cut);
  }
  return out;
}

double augmented_loss(const OracleContext& ctx, const std::vector<int>& node_of,
                      const std::vector<std::vector<double>>& values, double t, bool modified) {
  double total = 0.0;
  for (int i = 0; i < ctx.data.n(); ++i) {
    const Observation& o = ctx.data.observations[i];
    const double beta = values[node_of[i]][0];
    const double z = z_tilde(ctx, i, t);
    const double t_star = modified ? t : std::numeric_limits<double>::infinity();
    const double point = weight_at(ctx, i, t_star) * (z - beta) * (z - beta);
    const double upper = modified ? std::min(o.time, t) : o.time;
    const double aug = mart_sum(ctx, i, 0.0, upper, [&](double u) {
      const double y = y_at(ctx, i, u, t);
      return y - 2.0 * beta * y + beta * beta;
    });
    total += point + aug;
  }
  return total / ctx.data.n();
}

double omega_term(const OracleContext& ctx, int i, double t, double beta) {
  const Observation& o = ctx.data.observations[i];
  const double z = z_tilde(ctx, i, t);
  const double inf = std::numeric_limits<double>::infinity();
  const double dw = weight_at(ctx, i, inf) - weight_at(ctx, i, t);
  const double tail = mart_sum(ctx, i, std::min(o.time, t), o.time,
                               [&](double) { return beta * beta; });
  return dw * (z - beta) * (z - beta) + tail;
}

OracleReport pathwise_a1_check(const OracleContext& ctx, double t, double beta) {
  std::set<double> seen;
  for (const Observation& o : ctx.data.observations) {
    if (o.time == t || !seen.insert(o.time).second) {
      throw error("pathwise check requires tie-free data with t distinct from all times");
    }
  }
  OracleReport report;
  report.quantity = "a1-pathwise-max-abs-omega";
  double worst = 0.0;
  for (int i = 0; i < ctx.data.n(); ++i) {
    worst = std::max(worst, std::abs(omega_term(ctx, i, t, beta)));
  }
  report.oracle = 0.0;
  report.fast = worst;
  report.abs_dev = worst;
  report.rel_dev = worst;
  return report;
}

}  // namespace ciftree::oracle
