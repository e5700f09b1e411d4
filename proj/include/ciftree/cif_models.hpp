#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ciftree/data.hpp"

namespace ciftree {

// Pluggable cumulative-incidence model: cause-specific CIFs and the all-cause
// event-free probability, both as functions of covariates. Implementations
// must be immutable after construction; evaluation is const and thread-safe.
class CifModel {
 public:
  virtual ~CifModel() = default;

  // P(T <= t, M = cause | W = w), right-continuous in t.
  virtual double cif(double t, int cause, std::span<const double> w) const = 0;

  // Left limit P(T < t, M = cause | W = w); equals cif for continuous models.
  virtual double cif_left(double t, int cause, std::span<const double> w) const {
    return cif(t, cause, w);
  }

  // P(T >= u | W = w).
  virtual double event_free(double u, std::span<const double> w) const = 0;

  virtual int n_causes() const = 0;
  virtual std::string name() const = 0;
};

// Conditional probability of a cause-specific event inside [u, t] given
// survival to u:  P(u <= T <= t, M = cause | T >= u, W = w). Zero for u > t
// and, with *degenerate set, when the conditioning event has no mass.
double conditional_event_prob(const CifModel& model, double u, double t, int cause,
                              std::span<const double> w, bool* degenerate = nullptr);

// ---------------------------------------------------------------------------
// Two-cause subdistribution model with a unit-rate exponential baseline:
//   cif_1(t; w) = 1 - (1 - p (1 - e^{-t}))^{exp(beta1 z(w))}
//   cif_2(t; w) = (1 - p)^{exp(beta1 z(w))} (1 - e^{-t exp(beta2 z(w))})
// with z(w) = 1{w_1 <= 0.5 and w_2 > 0.5}. The two curves sum to one at
// t = infinity for every w.
struct FineGrayParams {
  double beta1 = 3.0;
  double beta2 = -0.5;
  double p = 0.3;
};

int fine_gray_group(std::span<const double> w);

class FineGrayModel final : public CifModel {
 public:
  explicit FineGrayModel(FineGrayParams params);

  double cif(double t, int cause, std::span<const double> w) const override;
  double event_free(double u, std::span<const double> w) const override;
  int n_causes() const override { return 2; }
  std::string name() const override;

  const FineGrayParams& params() const { return params_; }

  // Evaluations with the binary group indicator fixed.
  double cif_group(double t, int cause, int z) const;

 private:
  FineGrayParams params_;
};

// ---------------------------------------------------------------------------
// Covariate-free Aalen-Johansen estimator: all-cause product-limit survival
// with per-cause incidence increments survival(u-) d_mk / r_k at event times.
class AalenJohansenModel final : public CifModel {
 public:
  double cif(double t, int cause, std::span<const double> w) const override;
  double cif_left(double t, int cause, std::span<const double> w) const override;
  double event_free(double u, std::span<const double> w) const override;
  int n_causes() const override { return static_cast<int>(cum_incidence_.size()); }
  std::string name() const override { return "aalen-johansen"; }

  const std::vector<double>& event_times() const { return event_times_; }
  // Post-time values at event_times()[k].
  double survival_after(int k) const { return survival_[k]; }
  double cum_incidence_after(int k, int cause) const { return cum_incidence_[cause - 1][k]; }

  void save_curves_csv(const std::string& path) const;

  friend AalenJohansenModel fit_aalen_johansen(const Dataset& data);

 private:
  std::vector<double> event_times_;                   // times with >= 1 event
  std::vector<double> survival_;                      // post-time KM values
  std::vector<std::vector<double>> cum_incidence_;    // per cause, cumulative
};

AalenJohansenModel fit_aalen_johansen(const Dataset& data);

}  // namespace ciftree
