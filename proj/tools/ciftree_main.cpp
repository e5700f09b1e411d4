// ciftree command line: simulate competing-risks data, fit CIF regression
// trees, predict, evaluate predictions against known truth, and run the
// replication experiment grid.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ciftree/oracle.hpp"
#include "ciftree/simulation.hpp"
#include "ciftree/tree.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string timestamp() {
  char buf[64];
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_header(std::ofstream& out, const std::string& summary, std::uint64_t seed) {
  out << "# ciftree " << kVersion << " | " << summary << " | seed=" << seed << "\n";
  out << "# generated: " << timestamp() << "\n";
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ciftree::error("cannot parse " + what + " value '" + tok + "'");
    }
  }
  if (out.empty()) throw ciftree::error(what + " list is empty");
  return out;
}

ciftree::FineGrayParams parse_fg_spec(const std::string& spec) {
  const auto vals = parse_double_list(spec, "fg parameter");
  if (vals.size() != 3) throw ciftree::error("fg-true spec needs beta1,beta2,p");
  return {vals[0], vals[1], vals[2]};
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Flat key=value defaults for one subcommand. Explicit command-line flags
// win; keys that do not name an option of the subcommand are rejected.
void apply_config(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ciftree::error("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ciftree::error("config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw ciftree::error("config line " + std::to_string(lineno) + ": bad key");
    }
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw ciftree::error("unknown config key '" + key + "' for subcommand " +
                           cmd->get_name());
    }
    if (opt->count() > 0) continue;  // explicit flag wins
    opt->add_result(value);
    opt->run_callback();
  }
}

// Shared fit options wired into a FitConfig.
struct FitFlags {
  std::string loss = "dr";
  int cause = 1;
  int minbucket = 10;
  int minsplit = 30;
  int max_depth = 30;
  int folds = 10;
  int repeats = 1;
  std::uint64_t seed = 1;
  double floor = 0.05;
  std::string alpha_mode = "geometric";
  std::string select_rule = "min";
  std::string count_mode = "auto";
  bool refit_nuisance = false;
  bool isotonic = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--loss", loss, "loss family: full|ipcw1|ipcw2|bj|dr")
        ->default_val(loss);
    cmd->add_option("--cause", cause, "event cause of interest")->default_val(cause);
    cmd->add_option("--minbucket", minbucket, "minimum node size")->default_val(minbucket);
    cmd->add_option("--minsplit", minsplit, "minimum size to attempt a split")
        ->default_val(minsplit);
    cmd->add_option("--max-depth", max_depth, "depth cap")->default_val(max_depth);
    cmd->add_option("--folds", folds, "cross-validation folds")->default_val(folds);
    cmd->add_option("--repeats", repeats, "cross-validation repeats")->default_val(repeats);
    cmd->add_option("--seed", seed, "RNG seed")->default_val(seed);
    cmd->add_option("--floor", floor, "positivity floor for censoring weights")
        ->default_val(floor);
    cmd->add_option("--alpha-mode", alpha_mode, "penalty evaluation: geometric|endpoint")
        ->default_val(alpha_mode);
    cmd->add_option("--select", select_rule, "subtree selection rule: min|1se")
        ->default_val(select_rule);
    cmd->add_option("--count-mode", count_mode,
                    "size gates count: auto|all|uncensored")
        ->default_val(count_mode);
    cmd->add_flag("--refit-nuisance", refit_nuisance,
                  "refit censoring/CIF models inside each fold");
    cmd->add_flag("--isotonic", isotonic, "monotone post-processing of predictions");
  }

  ciftree::FitConfig to_config() const {
    ciftree::FitConfig cfg;
    cfg.loss = ciftree::loss_kind_from_name(loss);
    cfg.cause = cause;
    cfg.minbucket = minbucket;
    cfg.minsplit = minsplit;
    cfg.max_depth = max_depth;
    cfg.cv_folds = folds;
    cfg.cv_repeats = repeats;
    cfg.seed = seed;
    cfg.floor = floor;
    if (alpha_mode == "geometric") {
      cfg.geometric_alpha = true;
    } else if (alpha_mode == "endpoint") {
      cfg.geometric_alpha = false;
    } else {
      throw ciftree::error("alpha-mode must be geometric|endpoint");
    }
    if (select_rule == "min") {
      cfg.select_rule = ciftree::SelectRule::MinRisk;
    } else if (select_rule == "1se") {
      cfg.select_rule = ciftree::SelectRule::OneSE;
    } else {
      throw ciftree::error("select must be min|1se");
    }
    if (count_mode == "all") {
      cfg.count_mode = ciftree::CountMode::AllObs;
    } else if (count_mode == "uncensored") {
      cfg.count_mode = ciftree::CountMode::UncensoredOnly;
    } else if (count_mode != "auto") {
      throw ciftree::error("count-mode must be auto|all|uncensored");
    }
    cfg.refit_nuisance_per_fold = refit_nuisance;
    cfg.isotonic = isotonic;
    return cfg;
  }

  std::string summary() const {
    std::ostringstream os;
    os << "loss=" << loss << " cause=" << cause << " minbucket=" << minbucket
       << " minsplit=" << minsplit << " max-depth=" << max_depth << " folds=" << folds
       << " repeats=" << repeats << " floor=" << floor << " alpha-mode=" << alpha_mode
       << " select=" << select_rule << " count-mode=" << count_mode
       << " refit-nuisance=" << refit_nuisance << " isotonic=" << isotonic;
    return os.str();
  }
};

// --------------------------------------------------------------------------

struct SimulateArgs {
  std::string preset = "high";
  double beta1 = std::nan("");
  double beta2 = std::nan("");
  double p = std::nan("");
  int n = 500;
  int n_test = 2000;
  std::uint64_t seed = 1;
  std::string gamma = "auto";
  double censor_target = 0.5;
  std::string quantiles = "0.25,0.5,0.75";
  std::string out = "sim_out";
};

int cmd_simulate(const SimulateArgs& a) {
  namespace fs = std::filesystem;
  ciftree::SimDesign design = ciftree::design_preset(a.preset);
  if (!std::isnan(a.beta1)) design.fg.beta1 = a.beta1;
  if (!std::isnan(a.beta2)) design.fg.beta2 = a.beta2;
  if (!std::isnan(a.p)) design.fg.p = a.p;
  design.n = a.n;
  design.n_test = a.n_test;
  design.seed = a.seed;
  design.censor_target = a.censor_target;

  fs::create_directories(a.out);
  const std::vector<double> probs = parse_double_list(a.quantiles, "quantile");
  const std::vector<double> grid_times =
      ciftree::true_time_quantiles(design.fg, probs, a.out);

  double gamma;
  if (a.gamma == "auto") {
    ciftree::Rng rng(ciftree::mix_seed(design.seed, 777));
    gamma = ciftree::calibrate_gamma(design, rng);
    std::fprintf(stderr, "ciftree: calibrated censoring rate gamma = %.6g\n", gamma);
  } else {
    gamma = std::stod(a.gamma);
  }

  std::ostringstream summary;
  summary << "simulate preset=" << a.preset << " beta1=" << design.fg.beta1
          << " beta2=" << design.fg.beta2 << " p=" << design.fg.p << " n=" << a.n
          << " n-test=" << a.n_test << " gamma=" << fmt(gamma)
          << " censor-target=" << a.censor_target << " quantiles=" << a.quantiles;

  ciftree::Rng rng(ciftree::mix_seed(design.seed, 1));
  const ciftree::Dataset full = ciftree::sample_full(design, rng);
  const ciftree::Dataset train = ciftree::apply_censoring(full, gamma, rng);
  ciftree::SimDesign test_design = design;
  test_design.n = design.n_test;
  const ciftree::Dataset test = ciftree::sample_full(test_design, rng);

  ciftree::save_csv(train, a.out + "/train.csv",
                    {"ciftree " + std::string(kVersion) + " | " + summary.str() +
                     " | seed=" + std::to_string(a.seed)});
  ciftree::save_csv(test, a.out + "/test.csv",
                    {"ciftree " + std::string(kVersion) + " | " + summary.str() +
                     " | seed=" + std::to_string(a.seed)});

  // True cause-1 curves for each test row at the grid times.
  {
    std::ofstream out(a.out + "/truth.csv");
    write_header(out, summary.str(), a.seed);
    out << "row,t_index,t,psi1\n";
    const ciftree::FineGrayModel truth(design.fg);
    for (int i = 0; i < test.n(); ++i) {
      const int z = ciftree::fine_gray_group(test.observations[i].covariates);
      for (size_t j = 0; j < grid_times.size(); ++j) {
        out << i << "," << j << "," << fmt(grid_times[j]) << ","
            << fmt(truth.cif_group(grid_times[j], 1, z)) << "\n";
      }
    }
  }
  {
    std::ofstream out(a.out + "/meta.csv");
    write_header(out, summary.str(), a.seed);
    out << "key,value\n";
    out << "gamma," << fmt(gamma) << "\n";
    out << "beta1," << fmt(design.fg.beta1) << "\n";
    out << "beta2," << fmt(design.fg.beta2) << "\n";
    out << "p," << fmt(design.fg.p) << "\n";
    for (size_t j = 0; j < grid_times.size(); ++j) {
      out << "t" << j + 1 << "," << fmt(grid_times[j]) << "\n";
    }
  }
  return 0;
}

// --------------------------------------------------------------------------

struct FitArgs {
  std::string data;
  std::string psi = "aj";
  std::string times;
  std::string quantiles;
  std::string weights;
  int n_causes = 0;
  std::string out = "fit_out";
  FitFlags flags;
};

ciftree::TimeGrid resolve_grid(const FitArgs& a, const ciftree::Dataset& data) {
  std::vector<double> weights;
  if (!a.weights.empty()) weights = parse_double_list(a.weights, "weight");
  if (!a.times.empty()) {
    return ciftree::TimeGrid(parse_double_list(a.times, "time"), weights);
  }
  if (a.quantiles.empty()) {
    throw ciftree::error("fit needs --times or --quantiles");
  }
  // Quantiles of the observed event times (uncensored records).
  std::vector<double> events;
  for (const auto& o : data.observations) {
    if (o.delta == 1) events.push_back(o.time);
  }
  if (events.empty()) throw ciftree::error("no uncensored events to take quantiles of");
  std::sort(events.begin(), events.end());
  std::vector<double> ts;
  for (double q : parse_double_list(a.quantiles, "quantile")) {
    if (!(q > 0.0 && q < 1.0)) throw ciftree::error("quantiles must lie in (0,1)");
    size_t idx = static_cast<size_t>(q * events.size());
    idx = std::min(idx, events.size() - 1);
    ts.push_back(events[idx]);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  return ciftree::TimeGrid(ts, weights);
}

std::unique_ptr<ciftree::CifModel> resolve_psi(const std::string& spec,
                                               const ciftree::Dataset& data) {
  if (spec == "aj") {
    return std::make_unique<ciftree::AalenJohansenModel>(ciftree::fit_aalen_johansen(data));
  }
  if (spec.rfind("fg-true:", 0) == 0) {
    return std::make_unique<ciftree::FineGrayModel>(parse_fg_spec(spec.substr(8)));
  }
  throw ciftree::error("unknown psi spec '" + spec + "' (expected aj or fg-true:b1,b2,p)");
}

int cmd_fit(const FitArgs& a) {
  namespace fs = std::filesystem;
  const ciftree::Dataset data = ciftree::load_csv(a.data, {}, a.n_causes);
  ciftree::FitConfig cfg = a.flags.to_config();
  cfg.grid = resolve_grid(a, data);
  const auto psi = resolve_psi(a.psi, data);

  ciftree::FitResult result;
  try {
    result = ciftree::fit(data, *psi, cfg);
  } catch (const ciftree::positivity_error& e) {
    const ciftree::CensoringModel cens = ciftree::fit_km(data);
    const double tau = ciftree::choose_tau(cens, data, cfg.floor);
    std::fprintf(stderr,
                 "ciftree: positivity violation: %s\n"
                 "ciftree: hint: restrict the grid to times <= tau = %.6g or lower --floor\n",
                 e.what(), tau);
    throw;
  }

  std::ostringstream summary;
  summary << "fit data=" << a.data << " psi=" << a.psi;
  summary << " times=";
  for (int j = 0; j < cfg.grid.size(); ++j) {
    summary << (j ? ";" : "") << fmt(cfg.grid.times[j]);
  }
  summary << " " << a.flags.summary();

  fs::create_directories(a.out);
  {
    std::ofstream out(a.out + "/tree.json");
    out << ciftree::tree_to_json(result.tree, cfg.seed, summary.str());
  }
  {
    std::ofstream out(a.out + "/cvrisk.csv");
    write_header(out, summary.str(), cfg.seed);
    out << "entry,alpha,leaves,train_loss,cv_risk,cv_se,selected\n";
    for (size_t r = 0; r < result.path.entries.size(); ++r) {
      const auto& e = result.path.entries[r];
      out << r << "," << fmt(e.alpha) << "," << e.n_leaves << "," << fmt(e.train_loss) << ","
          << fmt(e.cv_risk) << "," << fmt(e.cv_se) << ","
          << (static_cast<int>(r) == result.selected ? 1 : 0) << "\n";
    }
  }
  {
    std::ofstream out(a.out + "/leaves.csv");
    write_header(out, summary.str(), cfg.seed);
    out << "leaf,n,t_index,t,cif\n";
    for (size_t id = 0; id < result.tree.nodes.size(); ++id) {
      const auto& nd = result.tree.nodes[id];
      if (!nd.is_leaf()) continue;
      for (int j = 0; j < cfg.grid.size(); ++j) {
        out << id << "," << nd.estimate.n_members << "," << j << ","
            << fmt(cfg.grid.times[j]) << "," << fmt(nd.estimate.clamped(j)) << "\n";
      }
    }
  }
  if (std::isfinite(result.tau)) {
    std::fprintf(stderr, "ciftree: truncation horizon tau = %.6g\n", result.tau);
  }
  std::fprintf(stderr, "ciftree: selected subtree with %d leaves (entry %d of %zu)\n",
               result.path.entries[result.selected].n_leaves, result.selected,
               result.path.entries.size());
  return 0;
}

// --------------------------------------------------------------------------

// Covariate-only CSV reader keyed by the tree's covariate names.
std::vector<std::vector<double>> load_covariates(const std::string& path,
                                                 const std::vector<std::string>& names) {
  std::ifstream in(path);
  if (!in) throw ciftree::csv_error("cannot open " + path);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
    break;
  }
  std::vector<int> cols;
  for (const std::string& name : names) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ciftree::csv_error("covariate '" + name + "' not found in " + path);
    }
    cols.push_back(static_cast<int>(it - header.begin()));
  }
  std::vector<std::vector<double>> rows;
  int rowno = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    ++rowno;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) fields.push_back(tok);
    std::vector<double> w;
    for (int c : cols) {
      if (c >= static_cast<int>(fields.size())) {
        throw ciftree::csv_error("ragged row " + std::to_string(rowno) + " in " + path);
      }
      try {
        w.push_back(std::stod(fields[c]));
      } catch (const std::exception&) {
        throw ciftree::csv_error("cannot parse covariate at row " + std::to_string(rowno));
      }
    }
    rows.push_back(std::move(w));
  }
  return rows;
}

struct PredictArgs {
  std::string tree;
  std::string data;
  std::string out = "pred.csv";
};

int cmd_predict(const PredictArgs& a) {
  std::ifstream in(a.tree);
  if (!in) throw ciftree::csv_error("cannot open " + a.tree);
  std::stringstream buf;
  buf << in.rdbuf();
  const ciftree::Tree tree = ciftree::tree_from_json(buf.str());
  const auto rows = load_covariates(a.data, tree.covariate_names);

  std::ofstream out(a.out);
  if (!out) throw ciftree::csv_error("cannot write " + a.out);
  write_header(out, "predict tree=" + a.tree + " data=" + a.data, 0);
  out << "row,t_index,t,cif\n";
  for (size_t i = 0; i < rows.size(); ++i) {
    const std::vector<double> pred = tree.predict(rows[i]);
    for (int j = 0; j < tree.grid.size(); ++j) {
      out << i << "," << j << "," << fmt(tree.grid.times[j]) << "," << fmt(pred[j]) << "\n";
    }
  }
  return 0;
}

// --------------------------------------------------------------------------

struct EvaluateArgs {
  std::string pred;
  std::string truth;
  std::string tree;
  std::string out = "eval.csv";
};

// Long-format (row, t_index, t, value) reader shared by pred and truth files.
struct LongTable {
  std::vector<double> times;                  // per t_index
  std::vector<std::vector<double>> values;    // [row][t_index]
};

LongTable load_long(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ciftree::csv_error("cannot open " + path);
  LongTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string tok;
    std::vector<std::string> f;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 4) throw ciftree::csv_error("expected row,t_index,t,value in " + path);
    const size_t row = std::stoul(f[0]);
    const size_t j = std::stoul(f[1]);
    const double t = std::stod(f[2]);
    const double v = std::stod(f[3]);
    if (table.values.size() <= row) table.values.resize(row + 1);
    if (table.values[row].size() <= j) table.values[row].resize(j + 1);
    table.values[row][j] = v;
    if (table.times.size() <= j) table.times.resize(j + 1);
    table.times[j] = t;
  }
  return table;
}

int cmd_evaluate(const EvaluateArgs& a) {
  const LongTable pred = load_long(a.pred);
  const LongTable truth = load_long(a.truth);
  if (pred.values.size() != truth.values.size() || pred.times.size() != truth.times.size()) {
    throw ciftree::error("prediction and truth files do not align");
  }
  const size_t n = pred.values.size();
  const size_t nj = pred.times.size();

  std::ofstream out(a.out);
  if (!out) throw ciftree::csv_error("cannot write " + a.out);
  write_header(out, "evaluate pred=" + a.pred + " truth=" + a.truth, 0);
  out << "metric,t_index,t,value\n";
  for (size_t j = 0; j < nj; ++j) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double d = pred.values[i][j] - truth.values[i][j];
      acc += d * d;
    }
    out << "pred_error," << j << "," << fmt(pred.times[j]) << "," << fmt(acc / n) << "\n";
  }
  if (!a.tree.empty()) {
    std::ifstream tin(a.tree);
    if (!tin) throw ciftree::csv_error("cannot open " + a.tree);
    std::stringstream buf;
    buf << tin.rdbuf();
    const ciftree::Tree tree = ciftree::tree_from_json(buf.str());
    int noise = 0;
    bool signal_only = true;
    for (const auto& nd : tree.nodes) {
      if (nd.is_leaf()) continue;
      if (nd.covariate >= 2) {
        ++noise;
        signal_only = false;
      }
    }
    const int leaves = tree.n_leaves();
    out << "leaves,,," << leaves << "\n";
    out << "size_dev,,," << std::abs(leaves - 3) << "\n";
    out << "nsp,,," << noise << "\n";
    out << "pcsp,,," << ((signal_only && leaves == 3) ? 1 : 0) << "\n";
  }
  return 0;
}

// --------------------------------------------------------------------------

struct ExperimentArgs {
  std::string methods = "ipcw1,ipcw2,bj-fg,dr-fg";
  std::string preset = "high";
  int n = 500;
  int n_test = 2000;
  int reps = 100;
  std::string gamma = "auto";
  int threads = 0;
  bool no_resume = false;
  std::string out = "experiment_out";
  FitFlags flags;
};

int cmd_experiment(const ExperimentArgs& a) {
  ciftree::ExperimentConfig cfg;
  cfg.design = ciftree::design_preset(a.preset);
  cfg.design.n = a.n;
  cfg.design.n_test = a.n_test;
  cfg.design.n_reps = a.reps;
  cfg.design.seed = a.flags.seed;
  if (a.gamma != "auto") cfg.design.gamma = std::stod(a.gamma);
  cfg.setting = a.preset;
  cfg.out_dir = a.out;
  cfg.resume = !a.no_resume;

  cfg.threads = a.threads;
  if (cfg.threads == 0) {
    if (const char* env = std::getenv("CIFTREE_THREADS")) cfg.threads = std::atoi(env);
  }

  std::stringstream ss(a.methods);
  std::string tok;
  while (std::getline(ss, tok, ',')) cfg.methods.push_back(ciftree::method_from_name(tok));
  cfg.fit = a.flags.to_config();

  const ciftree::ExperimentResult result = ciftree::run_experiment(cfg);
  std::fprintf(stderr, "ciftree: experiment done: %zu method-reps, %d failed; gamma=%.6g\n",
               result.outcomes.size(), result.n_failed, result.gamma);
  return result.n_failed > 0 ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIF regression trees for competing risks"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path[5];
  auto add_config = [&](CLI::App* cmd, int slot) {
    cmd->add_option("--config", config_path[slot], "flat key=value file with option defaults");
  };

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "generate train/test data with truth");
  add_config(c_sim, 0);
  c_sim->add_option("--preset", sim.preset, "high|medium|low")->default_val(sim.preset);
  c_sim->add_option("--beta1", sim.beta1, "override beta1");
  c_sim->add_option("--beta2", sim.beta2, "override beta2");
  c_sim->add_option("--p", sim.p, "override mixing mass p");
  c_sim->add_option("--n", sim.n, "training size")->default_val(sim.n);
  c_sim->add_option("--n-test", sim.n_test, "test size")->default_val(sim.n_test);
  c_sim->add_option("--seed", sim.seed, "RNG seed")->default_val(sim.seed);
  c_sim->add_option("--gamma", sim.gamma, "censoring rate or 'auto'")->default_val(sim.gamma);
  c_sim->add_option("--censor-target", sim.censor_target, "target censoring fraction")
      ->default_val(sim.censor_target);
  c_sim->add_option("--quantiles", sim.quantiles, "grid quantiles of the true event time")
      ->default_val(sim.quantiles);
  c_sim->add_option("--out", sim.out, "output directory")->default_val(sim.out);

  FitArgs fita;
  CLI::App* c_fit = app.add_subcommand("fit", "fit a CIF regression tree");
  add_config(c_fit, 1);
  c_fit->add_option("--data", fita.data, "training CSV")->required();
  c_fit->add_option("--psi", fita.psi, "CIF model: aj | fg-true:b1,b2,p")
      ->default_val(fita.psi);
  c_fit->add_option("--times", fita.times, "comma-separated grid times");
  c_fit->add_option("--quantiles", fita.quantiles,
                    "grid as quantiles of observed event times");
  c_fit->add_option("--weights", fita.weights, "comma-separated grid weights");
  c_fit->add_option("--n-causes", fita.n_causes, "override cause count K");
  c_fit->add_option("--out", fita.out, "output directory")->default_val(fita.out);
  fita.flags.attach(c_fit);

  PredictArgs pred;
  CLI::App* c_pred = app.add_subcommand("predict", "predict CIF values from a tree document");
  add_config(c_pred, 2);
  c_pred->add_option("--tree", pred.tree, "tree.json from fit")->required();
  c_pred->add_option("--data", pred.data, "covariate CSV")->required();
  c_pred->add_option("--out", pred.out, "output CSV")->default_val(pred.out);

  EvaluateArgs eval;
  CLI::App* c_eval = app.add_subcommand("evaluate", "score predictions against known truth");
  add_config(c_eval, 3);
  c_eval->add_option("--pred", eval.pred, "predictions CSV (from predict)")->required();
  c_eval->add_option("--truth", eval.truth, "truth CSV (from simulate)")->required();
  c_eval->add_option("--tree", eval.tree, "optional tree.json for structural metrics");
  c_eval->add_option("--out", eval.out, "output CSV")->default_val(eval.out);

  ExperimentArgs exp;
  CLI::App* c_exp = app.add_subcommand("experiment", "replication grid with aggregate tables");
  add_config(c_exp, 4);
  c_exp->add_option("--methods", exp.methods, "comma list: full|ipcw1|ipcw2|bj-aj|bj-fg|dr-aj|dr-fg")
      ->default_val(exp.methods);
  c_exp->add_option("--preset", exp.preset, "high|medium|low")->default_val(exp.preset);
  c_exp->add_option("--n", exp.n, "training size")->default_val(exp.n);
  c_exp->add_option("--n-test", exp.n_test, "test size")->default_val(exp.n_test);
  c_exp->add_option("--reps", exp.reps, "replications")->default_val(exp.reps);
  c_exp->add_option("--gamma", exp.gamma, "censoring rate or 'auto'")->default_val(exp.gamma);
  c_exp->add_option("--threads", exp.threads, "worker threads (0: CIFTREE_THREADS or all)")
      ->default_val(exp.threads);
  c_exp->add_flag("--no-resume", exp.no_resume, "recompute finished replications");
  c_exp->add_option("--out", exp.out, "output directory")->default_val(exp.out);
  exp.flags.attach(c_exp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    CLI::App* cmds[5] = {c_sim, c_fit, c_pred, c_eval, c_exp};
    for (int k = 0; k < 5; ++k) {
      if (cmds[k]->parsed() && !config_path[k].empty()) apply_config(cmds[k], config_path[k]);
    }
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_fit->parsed()) return cmd_fit(fita);
    if (c_pred->parsed()) return cmd_predict(pred);
    if (c_eval->parsed()) return cmd_evaluate(eval);
    if (c_exp->parsed()) return cmd_experiment(exp);
  } catch (const ciftree::positivity_error& e) {
    std::fprintf(stderr, "ciftree: numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ciftree: error: %s\n", e.what());
    return 2;
  }
  return 0;
}
