#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ciftree/cif_models.hpp"
#include "ciftree/tree.hpp"

namespace ciftree {

using Rng = std::mt19937_64;

// Data-generating design: two-cause subdistribution model over ten
// independent Unif(0,1) covariates, exponential censoring calibrated to a
// target marginal censoring fraction.
struct SimDesign {
  FineGrayParams fg;
  int n = 500;
  int p_cov = 10;
  double censor_target = 0.5;
  std::optional<double> gamma;  // censoring rate; calibrated when unset
  int n_test = 2000;
  int n_reps = 100;
  std::uint64_t seed = 1;
};

// Presets: high (beta1 = 3), medium (beta1 = 2), low (beta1 = 1.5), each
// with beta2 = -0.5 and p = 0.3.
SimDesign design_preset(const std::string& name);

// Conditional distribution function of the cause-1 time given cause 1 and
// group z, and its exact inverse used by the sampler.
double cause1_conditional_cdf(const FineGrayParams& fg, int z, double t);
double sample_cause1_time(const FineGrayParams& fg, int z, double u);

// Draw (time, cause) for a subject in group z.
std::pair<double, int> sample_event(const FineGrayParams& fg, int z, Rng& rng);

// Fully observed sample: every record has delta = 1 and the true cause.
Dataset sample_full(const SimDesign& design, Rng& rng);

// Exponential rate giving the target censoring fraction to within tol,
// found by bisection against a Monte Carlo draw of event times.
double calibrate_gamma(const SimDesign& design, Rng& rng, int n_draws = 100000,
                       double tol = 0.005);

// Overlay independent Exp(gamma) censoring on a fully observed sample.
Dataset apply_censoring(const Dataset& full, double gamma, Rng& rng);

// Grid times as quantiles of the true marginal distribution of the event
// time, estimated once from a large fixed-seed Monte Carlo draw and cached
// in cache_dir when given.
std::vector<double> true_time_quantiles(const FineGrayParams& fg,
                                        const std::vector<double>& probs,
                                        const std::string& cache_dir = "",
                                        int n_draws = 1000000);

// Per-replication performance summary.
struct PerfReport {
  std::vector<double> pred_error;  // mean squared prediction error per grid time
  int leaves = 0;
  int size_dev = 0;   // |leaves - 3|
  int nsp = 0;        // splits on noise covariates (any beyond the first two)
  int pcsp = 0;       // 1 iff split covariates within the first two and 3 leaves
};

PerfReport evaluate_tree(const Tree& tree, const FineGrayParams& fg, const Dataset& test,
                         const TimeGrid& grid);

// A method is a loss family plus the CIF-model source for its augmentation.
enum class PsiSource { None, AalenJohansen, FineGrayTrue };

struct Method {
  LossKind loss = LossKind::DoublyRobust;
  PsiSource psi = PsiSource::FineGrayTrue;
  std::string name;  // e.g. "dr-fg"
};

Method method_from_name(const std::string& name);

struct RepOutcome {
  int rep = 0;
  std::string method;
  bool failed = false;
  std::string message;
  PerfReport report;
};

struct ExperimentConfig {
  SimDesign design;
  std::vector<Method> methods;
  FitConfig fit;            // grid is filled from the true quantiles
  std::string out_dir;      // per-rep files, table and long-format errors
  std::string setting = "custom";
  int threads = 0;          // 0: hardware concurrency
  bool resume = true;
};

struct ExperimentResult {
  TimeGrid grid;
  double gamma = 0.0;
  std::vector<RepOutcome> outcomes;  // methods x reps
  int n_failed = 0;
};

// Replication loop: per rep, draw a censored training set and an uncensored
// test set, fit every method, evaluate against the true curves. Reps run in
// parallel on derived RNG streams; finished reps are reloaded from disk when
// resuming. Writes table1.csv and prederr.csv under out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace ciftree
