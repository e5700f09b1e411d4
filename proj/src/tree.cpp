#include "ciftree/tree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>

#include <json.hpp>

namespace ciftree {

namespace {

constexpr double kGainTolScale = 1e-10;

double beta_from_sums(LossKind kind, double sum_b, double sum_c, int count, bool* ok) {
  if (kind == LossKind::Ipcw1 || kind == LossKind::Ipcw2) {
    if (sum_c <= 0.0) {
      *ok = false;
      return 0.0;
    }
    return sum_b / sum_c;
  }
  return sum_b / count;
}

int eligible_count(const LossStats& stats, const std::vector<int>& members, CountMode mode) {
  if (mode == CountMode::AllObs) return static_cast<int>(members.size());
  int k = 0;
  for (int i : members) k += stats.delta[i];
  return k;
}

struct SplitCand {
  int covariate = -1;
  double cut = 0.0;
  double gain = 0.0;
};

// Composite loss of a child node from its accumulated coefficient sums, at
// the child's own minimizer; NaN when inestimable.
double min_loss_from_sums(const LossStats& stats, LossKind kind, const double* sa,
                          const double* sb, const double* sc, int count) {
  double total = 0.0;
  for (int j = 0; j < stats.grid.size(); ++j) {
    bool ok = true;
    const double beta = beta_from_sums(kind, sb[j], sc[j], count, &ok);
    if (!ok) return std::numeric_limits<double>::quiet_NaN();
    total += stats.grid.weights[j] * (sa[j] - 2.0 * beta * sb[j] + beta * beta * sc[j]);
  }
  return total / stats.n;
}

// One pass per covariate over the members sorted by value, accumulating
// prefix sums of the per-observation quadratic coefficients; every midpoint
// between distinct consecutive values is a candidate cutpoint, each scored
// in O(J). Ties in gain resolve to the lowest covariate index, then the
// smallest cutpoint (scan order with a strict improvement test).
std::optional<SplitCand> best_split(const Dataset& data, const LossStats& stats,
                                    const FitConfig& cfg, const std::vector<int>& members,
                                    double parent_loss) {
  const int nj = stats.grid.size();
  const LossKind kind = cfg.loss;
  const CountMode mode = cfg.effective_count_mode();
  const int n_members = static_cast<int>(members.size());
  const double gain_tol = kGainTolScale * std::max(1.0, std::abs(parent_loss));

  // Totals over the node.
  std::vector<double> ta(nj, 0.0), tb(nj, 0.0), tc(nj, 0.0);
  int total_elig = 0;
  for (int i : members) {
    for (int j = 0; j < nj; ++j) {
      double a, b, c;
      stats.coeffs(kind, i, j, a, b, c);
      ta[j] += a;
      tb[j] += b;
      tc[j] += c;
    }
    total_elig += (mode == CountMode::AllObs) ? 1 : stats.delta[i];
  }

  std::vector<int> order(members);
  std::vector<double> la(nj), lb(nj), lc(nj), ra(nj), rb(nj), rc(nj);
  SplitCand best;
  bool found = false;

  for (int k = 0; k < data.n_covariates(); ++k) {
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      const double vx = data.covariate(x, k), vy = data.covariate(y, k);
      if (vx != vy) return vx < vy;
      return x < y;
    });
    std::fill(la.begin(), la.end(), 0.0);
    std::fill(lb.begin(), lb.end(), 0.0);
    std::fill(lc.begin(), lc.end(), 0.0);
    int left_elig = 0;
    for (int pos = 0; pos < n_members - 1; ++pos) {
      const int i = order[pos];
      for (int j = 0; j < nj; ++j) {
        double a, b, c;
        stats.coeffs(kind, i, j, a, b, c);
        la[j] += a;
        lb[j] += b;
        lc[j] += c;
      }
      left_elig += (mode == CountMode::AllObs) ? 1 : stats.delta[i];

      const double v = data.covariate(i, k);
      const double v_next = data.covariate(order[pos + 1], k);
      if (v == v_next) continue;

      const int right_elig = total_elig - left_elig;
      if (left_elig < cfg.minbucket || right_elig < cfg.minbucket) continue;
      const int left_count = pos + 1;
      const int right_count = n_members - left_count;

      for (int j = 0; j < nj; ++j) {
        ra[j] = ta[j] - la[j];
        rb[j] = tb[j] - lb[j];
        rc[j] = tc[j] - lc[j];
      }
      const double ll = min_loss_from_sums(stats, kind, la.data(), lb.data(), lc.data(),
                                           left_count);
      const double rl = min_loss_from_sums(stats, kind, ra.data(), rb.data(), rc.data(),
                                           right_count);
      if (std::isnan(ll) || std::isnan(rl)) continue;
      const double gain = parent_loss - ll - rl;
      if (gain > gain_tol && (!found || gain > best.gain)) {
        best.covariate = k;
        best.cut = 0.5 * (v + v_next);
        best.gain = gain;
        found = true;
      }
    }
  }
  if (!found) return std::nullopt;
  return best;
}

struct Grower {
  const Dataset& data;
  const LossStats& stats;
  const FitConfig& cfg;
  Tree& tree;

  int build(std::vector<int> members, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[id].depth = depth;
    NodeEstimate est = node_estimate(stats, members, cfg.loss);
    const double own_loss =
        std::accumulate(est.loss_contribution.begin(), est.loss_contribution.end(), 0.0);
    tree.nodes[id].estimate = std::move(est);

    const int elig = eligible_count(stats, members, cfg.effective_count_mode());
    if (elig < cfg.minsplit || depth >= cfg.max_depth) return id;
    auto cand = best_split(data, stats, cfg, members, own_loss);
    if (!cand) return id;

    std::vector<int> lm, rm;
    lm.reserve(members.size());
    rm.reserve(members.size());
    for (int i : members) {
      (data.covariate(i, cand->covariate) <= cand->cut ? lm : rm).push_back(i);
    }
    members.clear();
    members.shrink_to_fit();
    tree.nodes[id].covariate = cand->covariate;
    tree.nodes[id].cut = cand->cut;
    const int l = build(std::move(lm), depth + 1);
    const int r = build(std::move(rm), depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

}  // namespace

Tree grow(const Dataset& data, const LossStats& stats, const FitConfig& config) {
  std::vector<int> all(data.n());
  std::iota(all.begin(), all.end(), 0);
  return grow(data, stats, config, all);
}

Tree grow(const Dataset& data, const LossStats& stats, const FitConfig& config,
          const std::vector<int>& members) {
  if (members.empty()) throw error("cannot grow a tree on an empty member set");
  if (config.grid.size() != stats.grid.size()) throw error("config/stats grid mismatch");
  if (config.minbucket < 1) throw error("minbucket must be >= 1");
  if (config.minsplit < 2 * config.minbucket) {
    std::fprintf(stderr, "ciftree: warning: minsplit (%d) < 2*minbucket (%d)\n",
                 config.minsplit, 2 * config.minbucket);
  }
  Tree tree;
  tree.loss = config.loss;
  tree.cause = config.cause;
  tree.grid = stats.grid;
  tree.covariate_names = data.covariate_names;
  tree.tau = stats.tau;
  tree.isotonic = config.isotonic;
  Grower g{data, stats, config, tree};
  g.build(members, 0);
  return tree;
}

int Tree::n_leaves() const {
  int k = 0;
  for (const TreeNode& nd : nodes) k += nd.is_leaf();
  return k;
}

int Tree::leaf_for(std::span<const double> w) const {
  if (w.size() != covariate_names.size()) {
    throw error("covariate vector has length " + std::to_string(w.size()) + ", tree expects " +
                std::to_string(covariate_names.size()));
  }
  int id = 0;
  while (!nodes[id].is_leaf()) {
    id = (w[nodes[id].covariate] <= nodes[id].cut) ? nodes[id].left : nodes[id].right;
  }
  return id;
}

const std::vector<double>& Tree::predict_raw(std::span<const double> w) const {
  return nodes[leaf_for(w)].estimate.cif;
}

std::vector<double> Tree::predict(std::span<const double> w) const {
  std::vector<double> out = predict_raw(w);
  if (isotonic) out = isotonic_fit(out);
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return out;
}

std::vector<int> Tree::split_covariates() const {
  std::vector<int> covs;
  for (const TreeNode& nd : nodes) {
    if (!nd.is_leaf()) covs.push_back(nd.covariate);
  }
  std::sort(covs.begin(), covs.end());
  covs.erase(std::unique(covs.begin(), covs.end()), covs.end());
  return covs;
}

std::vector<double> isotonic_fit(const std::vector<double>& values) {
  // Pool adjacent violators with uniform weights.
  std::vector<double> level;
  std::vector<int> size;
  for (double v : values) {
    level.push_back(v);
    size.push_back(1);
    while (level.size() > 1 && level[level.size() - 2] > level.back()) {
      const double merged = (level[level.size() - 2] * size[size.size() - 2] +
                             level.back() * size.back()) /
                            (size[size.size() - 2] + size.back());
      size[size.size() - 2] += size.back();
      level[level.size() - 2] = merged;
      level.pop_back();
      size.pop_back();
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (size_t b = 0; b < level.size(); ++b) {
    out.insert(out.end(), size[b], level[b]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cost-complexity pruning.

namespace {

double as_leaf_loss(const TreeNode& nd) {
  return std::accumulate(nd.estimate.loss_contribution.begin(),
                         nd.estimate.loss_contribution.end(), 0.0);
}

struct SubtreeInfo {
  double loss = 0.0;
  int leaves = 0;
};

// Post-order pass over the current subtree (collapsed nodes act as leaves).
SubtreeInfo subtree_info(const Tree& tree, const std::vector<std::uint8_t>& collapsed,
                         int id, std::vector<SubtreeInfo>* memo) {
  const TreeNode& nd = tree.nodes[id];
  SubtreeInfo info;
  if (nd.is_leaf() || collapsed[id]) {
    info.loss = as_leaf_loss(nd);
    info.leaves = 1;
  } else {
    const SubtreeInfo l = subtree_info(tree, collapsed, nd.left, memo);
    const SubtreeInfo r = subtree_info(tree, collapsed, nd.right, memo);
    info.loss = l.loss + r.loss;
    info.leaves = l.leaves + r.leaves;
  }
  if (memo) (*memo)[id] = info;
  return info;
}

// Link cost of collapsing a reachable internal node: loss increase per leaf
// removed. Walks only the current subtree so stale info below already
// collapsed ancestors is never consulted.
void scan_link_costs(const Tree& tree, const std::vector<std::uint8_t>& collapsed,
                     const std::vector<SubtreeInfo>& info, int id, double* g_min) {
  const TreeNode& nd = tree.nodes[id];
  if (nd.is_leaf() || collapsed[id]) return;
  const double g = (as_leaf_loss(nd) - info[id].loss) / (info[id].leaves - 1);
  *g_min = std::min(*g_min, g);
  scan_link_costs(tree, collapsed, info, nd.left, g_min);
  scan_link_costs(tree, collapsed, info, nd.right, g_min);
}

void collect_weakest(const Tree& tree, const std::vector<std::uint8_t>& collapsed,
                     const std::vector<SubtreeInfo>& info, int id, double threshold,
                     std::vector<int>* to_collapse) {
  const TreeNode& nd = tree.nodes[id];
  if (nd.is_leaf() || collapsed[id]) return;
  const double g = (as_leaf_loss(nd) - info[id].loss) / (info[id].leaves - 1);
  if (g <= threshold) {
    to_collapse->push_back(id);
    return;  // collapsing this node removes all descendants
  }
  collect_weakest(tree, collapsed, info, nd.left, threshold, to_collapse);
  collect_weakest(tree, collapsed, info, nd.right, threshold, to_collapse);
}

}  // namespace

PrunePath prune_path(const Tree& tree, const FitConfig&) {
  PrunePath path;
  std::vector<std::uint8_t> collapsed(tree.nodes.size(), 0);
  std::vector<SubtreeInfo> info(tree.nodes.size());

  SubtreeInfo root = subtree_info(tree, collapsed, 0, &info);
  path.entries.push_back({0.0, collapsed, root.leaves, root.loss});

  while (!(tree.nodes[0].is_leaf() || collapsed[0])) {
    double g_min = std::numeric_limits<double>::infinity();
    scan_link_costs(tree, collapsed, info, 0, &g_min);
    std::vector<int> to_collapse;
    const double threshold = g_min + 1e-12 * std::max(1.0, std::abs(g_min));
    collect_weakest(tree, collapsed, info, 0, threshold, &to_collapse);
    if (to_collapse.empty()) break;  // numeric safety; cannot happen
    for (int id : to_collapse) collapsed[id] = 1;

    root = subtree_info(tree, collapsed, 0, &info);
    path.entries.push_back({g_min, collapsed, root.leaves, root.loss});
  }
  return path;
}

int PrunePath::entry_for_alpha(double alpha) const {
  int best = 0;
  for (size_t r = 0; r < entries.size(); ++r) {
    if (entries[r].alpha <= alpha) best = static_cast<int>(r);
  }
  return best;
}

Tree prune_to(const Tree& tree, const PathEntry& entry) {
  Tree out;
  out.loss = tree.loss;
  out.cause = tree.cause;
  out.grid = tree.grid;
  out.covariate_names = tree.covariate_names;
  out.tau = tree.tau;
  out.isotonic = tree.isotonic;

  struct Copier {
    const Tree& src;
    const std::vector<std::uint8_t>& collapsed;
    Tree& dst;
    int copy(int id) {
      const int nid = static_cast<int>(dst.nodes.size());
      dst.nodes.push_back(src.nodes[id]);
      if (collapsed[id] || src.nodes[id].is_leaf()) {
        dst.nodes[nid].covariate = -1;
        dst.nodes[nid].left = dst.nodes[nid].right = -1;
        return nid;
      }
      const int l = copy(src.nodes[id].left);
      const int r = copy(src.nodes[id].right);
      dst.nodes[nid].left = l;
      dst.nodes[nid].right = r;
      return nid;
    }
  };
  Copier c{tree, entry.collapsed, out};
  c.copy(0);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validated risk along the path.

namespace {

const std::vector<double>& predict_masked(const Tree& tree,
                                          const std::vector<std::uint8_t>& collapsed,
                                          std::span<const double> w) {
  int id = 0;
  while (!tree.nodes[id].is_leaf() && !collapsed[id]) {
    id = (w[tree.nodes[id].covariate] <= tree.nodes[id].cut) ? tree.nodes[id].left
                                                             : tree.nodes[id].right;
  }
  return tree.nodes[id].estimate.cif;
}

double penalty_eval_point(const PrunePath& path, int r, bool geometric) {
  if (!geometric) return path.entries[r].alpha;
  const int last = static_cast<int>(path.entries.size()) - 1;
  if (r == last) return std::numeric_limits<double>::infinity();
  return std::sqrt(path.entries[r].alpha * path.entries[r + 1].alpha);
}

}  // namespace

void cross_validate(const Dataset& data, const CifModel& psi, const LossStats& stats,
                    const FitConfig& config, PrunePath& path) {
  const int n = data.n();
  const int q_folds = std::min(config.cv_folds, n);
  if (q_folds < 2) throw error("cross-validation needs at least two folds");
  const size_t n_entries = path.entries.size();
  std::vector<std::vector<double>> fold_values(n_entries);

  for (int rep = 0; rep < config.cv_repeats; ++rep) {
    const auto folds = split_folds(n, q_folds, mix_seed(config.seed, 9000 + rep));
    for (int q = 0; q < q_folds; ++q) {
      const std::vector<int>& heldout = folds[q];
      std::vector<std::uint8_t> in_heldout(n, 0);
      for (int i : heldout) in_heldout[i] = 1;
      std::vector<int> train;
      train.reserve(n - heldout.size());
      for (int i = 0; i < n; ++i) {
        if (!in_heldout[i]) train.push_back(i);
      }
      if (train.empty() || heldout.empty()) continue;

      // Weighted losses: a fold whose held-out part carries no weight at any
      // grid time contributes nothing and is skipped.
      if (config.loss == LossKind::Ipcw1 || config.loss == LossKind::Ipcw2) {
        double wsum = 0.0;
        for (int i : heldout) {
          for (int j = 0; j < stats.grid.size(); ++j) {
            double a, b, c;
            stats.coeffs(config.loss, i, j, a, b, c);
            wsum += c;
          }
        }
        if (wsum <= 0.0) {
          std::fprintf(stderr, "ciftree: warning: fold %d carries no weight; skipped\n",
                       q + 1);
          continue;
        }
      }

      Tree fold_tree;
      PrunePath fold_path;
      // Fold losses normalize by the full sample size while covering only
      // the training part, so fold critical penalties live on a scale shrunk
      // by n_train/n relative to the main path; match scales when probing.
      double alpha_scale = static_cast<double>(train.size()) / n;
      if (config.refit_nuisance_per_fold) {
        Dataset fold_data;
        fold_data.n_causes = data.n_causes;
        fold_data.covariate_names = data.covariate_names;
        fold_data.observations.reserve(train.size());
        for (int i : train) fold_data.observations.push_back(data.observations[i]);
        const CensoringModel fold_cens = fit_km(fold_data);
        std::unique_ptr<CifModel> fold_psi;
        const CifModel* psi_ptr = &psi;
        if (dynamic_cast<const AalenJohansenModel*>(&psi) != nullptr) {
          fold_psi = std::make_unique<AalenJohansenModel>(fit_aalen_johansen(fold_data));
          psi_ptr = fold_psi.get();
        }
        const LossStats fold_stats = precompute_stats(fold_data, fold_cens, *psi_ptr,
                                                      config.grid, config.cause, config.floor);
        fold_tree = grow(fold_data, fold_stats, config);
        fold_path = prune_path(fold_tree, config);
        alpha_scale = 1.0;  // fold stats normalize by the fold size already
      } else {
        fold_tree = grow(data, stats, config, train);
        fold_path = prune_path(fold_tree, config);
      }

      for (size_t r = 0; r < n_entries; ++r) {
        const double alpha = penalty_eval_point(path, static_cast<int>(r),
                                                config.geometric_alpha);
        const PathEntry& fe =
            fold_path.entries[fold_path.entry_for_alpha(alpha * alpha_scale)];
        double sum = 0.0;
        for (int i : heldout) {
          const std::vector<double>& pred =
              predict_masked(fold_tree, fe.collapsed, data.observations[i].covariates);
          sum += observation_risk(stats, i, pred, config.loss);
        }
        fold_values[r].push_back(sum / static_cast<double>(heldout.size()));
      }
    }
  }

  for (size_t r = 0; r < n_entries; ++r) {
    const std::vector<double>& vals = fold_values[r];
    if (vals.empty()) throw error("all cross-validation folds were skipped");
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    path.entries[r].cv_risk = mean;
    path.entries[r].cv_se =
        vals.size() > 1 ? std::sqrt(ss / (vals.size() - 1) / vals.size()) : 0.0;
  }
}

int select(const PrunePath& path, SelectRule rule) {
  int best = 0;
  double best_risk = std::numeric_limits<double>::infinity();
  for (size_t r = 0; r < path.entries.size(); ++r) {
    const double risk = path.entries[r].cv_risk;
    if (std::isnan(risk)) continue;
    if (risk <= best_risk) {  // ties resolve to the smaller subtree
      best_risk = risk;
      best = static_cast<int>(r);
    }
  }
  if (rule == SelectRule::OneSE) {
    const double threshold = best_risk + path.entries[best].cv_se;
    for (size_t r = best; r < path.entries.size(); ++r) {
      if (!std::isnan(path.entries[r].cv_risk) && path.entries[r].cv_risk <= threshold) {
        best = static_cast<int>(r);
      }
    }
  }
  return best;
}

FitResult fit(const Dataset& data, const CifModel& psi, const FitConfig& config) {
  data.validate();
  if (config.grid.size() == 0) throw error("fit requires a non-empty time grid");
  if (config.cause < 1 || config.cause > data.n_causes) {
    throw error("cause " + std::to_string(config.cause) + " out of range (K = " +
                std::to_string(data.n_causes) + ")");
  }
  const CensoringModel cens = fit_km(data);
  const LossStats stats =
      precompute_stats(data, cens, psi, config.grid, config.cause, config.floor);
  stats.check_positivity(config.loss);

  FitResult result;
  result.tau = stats.tau;
  result.maximal = grow(data, stats, config);
  result.path = prune_path(result.maximal, config);
  if (result.path.entries.size() > 1) {
    cross_validate(data, psi, stats, config, result.path);
    result.selected = select(result.path, config.select_rule);
  } else {
    result.selected = 0;
    result.path.entries[0].cv_risk = 0.0;
    result.path.entries[0].cv_se = 0.0;
  }
  result.tree = prune_to(result.maximal, result.path.entries[result.selected]);
  return result;
}

// ---------------------------------------------------------------------------
// JSON document.

std::string tree_to_json(const Tree& tree, std::uint64_t seed,
                         const std::string& flags_summary) {
  nlohmann::ordered_json doc;
  doc["schema"] = "ciftree-tree-v1";
  doc["version"] = "0.1.0";
  doc["loss"] = loss_kind_name(tree.loss);
  doc["cause"] = tree.cause;
  doc["grid"] = {{"times", tree.grid.times}, {"weights", tree.grid.weights}};
  doc["covariates"] = tree.covariate_names;
  if (std::isfinite(tree.tau)) {
    doc["tau"] = tree.tau;
  } else {
    doc["tau"] = nullptr;
  }
  doc["isotonic"] = tree.isotonic;
  doc["seed"] = seed;
  doc["flags"] = flags_summary;

  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (size_t id = 0; id < tree.nodes.size(); ++id) {
    const TreeNode& nd = tree.nodes[id];
    nlohmann::ordered_json jn;
    jn["id"] = id;
    jn["depth"] = nd.depth;
    jn["n"] = nd.estimate.n_members;
    if (!nd.is_leaf()) {
      jn["split"] = {{"covariate", nd.covariate},
                     {"name", tree.covariate_names[nd.covariate]},
                     {"cut", nd.cut}};
      jn["children"] = {nd.left, nd.right};
    }
    jn["cif_raw"] = nd.estimate.cif;
    nlohmann::ordered_json clamped = nlohmann::ordered_json::array();
    for (int j = 0; j < tree.grid.size(); ++j) clamped.push_back(nd.estimate.clamped(j));
    jn["cif"] = clamped;
    nodes.push_back(std::move(jn));
  }
  doc["nodes"] = std::move(nodes);
  return doc.dump(2) + "\n";
}

Tree tree_from_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  if (doc.value("schema", "") != "ciftree-tree-v1") {
    throw error("unrecognized tree document schema");
  }
  Tree tree;
  tree.loss = loss_kind_from_name(doc.at("loss").get<std::string>());
  tree.cause = doc.at("cause").get<int>();
  tree.grid = TimeGrid(doc.at("grid").at("times").get<std::vector<double>>(),
                       doc.at("grid").at("weights").get<std::vector<double>>());
  tree.covariate_names = doc.at("covariates").get<std::vector<std::string>>();
  tree.tau = doc.at("tau").is_null() ? std::numeric_limits<double>::infinity()
                                     : doc.at("tau").get<double>();
  tree.isotonic = doc.value("isotonic", false);
  for (const auto& jn : doc.at("nodes")) {
    TreeNode nd;
    nd.depth = jn.at("depth").get<int>();
    nd.estimate.n_members = jn.at("n").get<int>();
    nd.estimate.cif = jn.at("cif_raw").get<std::vector<double>>();
    nd.estimate.loss_contribution.assign(tree.grid.size(), 0.0);
    if (jn.contains("split")) {
      nd.covariate = jn.at("split").at("covariate").get<int>();
      nd.cut = jn.at("split").at("cut").get<double>();
      nd.left = jn.at("children")[0].get<int>();
      nd.right = jn.at("children")[1].get<int>();
    }
    tree.nodes.push_back(std::move(nd));
  }
  if (tree.nodes.empty()) throw error("tree document has no nodes");
  return tree;
}

}  // namespace ciftree
