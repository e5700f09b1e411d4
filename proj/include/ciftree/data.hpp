#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ciftree {

// Base class for all errors raised by the library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files or inconsistent records.
class csv_error : public error {
 public:
  using error::error;
};

// Censoring survival below the configured positivity floor; the caller
// should truncate the horizon (see choose_tau) and retry.
class positivity_error : public error {
 public:
  using error::error;
};

// One right-censored competing-risks record: follow-up time, the
// any-event indicator, the cause label (0 when censored) and covariates.
struct Observation {
  double time = 0.0;
  int delta = 0;
  int cause = 0;
  std::vector<double> covariates;
};

struct Dataset {
  std::vector<Observation> observations;
  int n_causes = 2;
  std::vector<std::string> covariate_names;

  int n() const { return static_cast<int>(observations.size()); }
  int n_covariates() const { return static_cast<int>(covariate_names.size()); }
  double covariate(int i, int k) const { return observations[i].covariates[k]; }

  // Throws csv_error on any record violating the time/delta/cause coupling
  // or a ragged covariate vector.
  void validate() const;
};

// Evaluation horizons t_1 < ... < t_J and their loss weights. Weights are
// normalized to sum to one on construction (uniform when omitted).
struct TimeGrid {
  std::vector<double> times;
  std::vector<double> weights;

  TimeGrid() = default;
  explicit TimeGrid(std::vector<double> ts, std::vector<double> ws = {});
  int size() const { return static_cast<int>(times.size()); }
};

// Column-name mapping for CSV ingestion. When covariates is empty every
// column other than time/status/cause is taken as a covariate, in order.
struct CsvSchema {
  std::string time = "time";
  std::string status = "status";
  std::string cause = "cause";
  std::vector<std::string> covariates;
};

// n_causes_override <= 0 infers K as the largest observed cause (at least 2).
Dataset load_csv(const std::string& path, const CsvSchema& schema = {},
                 int n_causes_override = 0);
void save_csv(const Dataset& data, const std::string& path,
              const std::vector<std::string>& header_comments = {});

// Deterministic partition of {0..n-1} into q folds with sizes differing by
// at most one.
std::vector<std::vector<int>> split_folds(int n, int q, std::uint64_t seed);

// Stream of decorrelated seeds derived from (seed, index); used wherever
// work units need independent deterministic generators.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace ciftree
