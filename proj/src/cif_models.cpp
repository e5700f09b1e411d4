#include "ciftree/cif_models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace ciftree {

double conditional_event_prob(const CifModel& model, double u, double t, int cause,
                              std::span<const double> w, bool* degenerate) {
  if (degenerate) *degenerate = false;
  if (u > t) return 0.0;
  const double alive = model.event_free(u, w);
  if (alive <= 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  const double window = model.cif(t, cause, w) - model.cif_left(u, cause, w);
  return std::clamp(window / alive, 0.0, 1.0);
}

// --------------------------------------------------------------------------

FineGrayModel::FineGrayModel(FineGrayParams params) : params_(params) {
  if (!(params_.p > 0.0 && params_.p < 1.0)) {
    throw error("mixing mass p must lie in (0, 1)");
  }
}

int fine_gray_group(std::span<const double> w) {
  if (w.size() < 2) throw error("group indicator needs at least two covariates");
  return (w[0] <= 0.5 && w[1] > 0.5) ? 1 : 0;
}

double FineGrayModel::cif_group(double t, int cause, int z) const {
  if (t <= 0.0) return 0.0;
  const double eta = std::exp(params_.beta1 * z);
  if (cause == 1) {
    return 1.0 - std::pow(1.0 - params_.p * (1.0 - std::exp(-t)), eta);
  }
  if (cause == 2) {
    return std::pow(1.0 - params_.p, eta) *
           (1.0 - std::exp(-t * std::exp(params_.beta2 * z)));
  }
  throw error("cause out of range for two-cause model");
}

double FineGrayModel::cif(double t, int cause, std::span<const double> w) const {
  return cif_group(t, cause, fine_gray_group(w));
}

double FineGrayModel::event_free(double u, std::span<const double> w) const {
  if (u <= 0.0) return 1.0;
  const int z = fine_gray_group(w);
  return std::max(0.0, 1.0 - cif_group(u, 1, z) - cif_group(u, 2, z));
}

std::string FineGrayModel::name() const {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "fg-true:%g,%g,%g", params_.beta1, params_.beta2,
                params_.p);
  return buf;
}

// --------------------------------------------------------------------------

AalenJohansenModel fit_aalen_johansen(const Dataset& data) {
  if (data.n() < 1) throw error("empty dataset");
  struct Tally {
    int censored = 0;
    std::vector<int> events;  // per cause
  };
  std::map<double, Tally> counts;
  for (const Observation& o : data.observations) {
    Tally& tl = counts[o.time];
    if (tl.events.empty()) tl.events.assign(data.n_causes, 0);
    if (o.delta == 0) {
      tl.censored += 1;
    } else {
      tl.events[o.cause - 1] += 1;
    }
  }

  AalenJohansenModel model;
  model.cum_incidence_.assign(data.n_causes, {});
  std::vector<double> cum(data.n_causes, 0.0);
  int at_risk = data.n();
  double surv = 1.0;
  for (const auto& [time, tl] : counts) {
    int total_events = 0;
    for (int d : tl.events) total_events += d;
    if (total_events > 0) {
      // Censorings tied with events stay in the risk set (events first).
      for (int m = 0; m < data.n_causes; ++m) {
        cum[m] += surv * static_cast<double>(tl.events[m]) / at_risk;
      }
      surv *= 1.0 - static_cast<double>(total_events) / at_risk;
      model.event_times_.push_back(time);
      model.survival_.push_back(surv);
      for (int m = 0; m < data.n_causes; ++m) model.cum_incidence_[m].push_back(cum[m]);
    }
    at_risk -= total_events + tl.censored;
  }
  return model;
}

double AalenJohansenModel::cif(double t, int cause, std::span<const double>) const {
  if (cause < 1 || cause > n_causes()) throw error("cause out of range");
  auto it = std::upper_bound(event_times_.begin(), event_times_.end(), t);
  auto k = it - event_times_.begin();
  return k == 0 ? 0.0 : cum_incidence_[cause - 1][k - 1];
}

double AalenJohansenModel::cif_left(double t, int cause, std::span<const double>) const {
  if (cause < 1 || cause > n_causes()) throw error("cause out of range");
  auto it = std::lower_bound(event_times_.begin(), event_times_.end(), t);
  auto k = it - event_times_.begin();
  return k == 0 ? 0.0 : cum_incidence_[cause - 1][k - 1];
}

double AalenJohansenModel::event_free(double u, std::span<const double>) const {
  auto it = std::lower_bound(event_times_.begin(), event_times_.end(), u);
  auto k = it - event_times_.begin();
  return k == 0 ? 1.0 : survival_[k - 1];
}

void AalenJohansenModel::save_curves_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw csv_error("cannot write " + path);
  out << "time,survival";
  for (int m = 1; m <= n_causes(); ++m) out << ",cif" << m;
  out << "\n";
  char buf[48];
  for (size_t k = 0; k < event_times_.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g", event_times_[k]);
    out << buf;
    std::snprintf(buf, sizeof(buf), ",%.17g", survival_[k]);
    out << buf;
    for (int m = 0; m < n_causes(); ++m) {
      std::snprintf(buf, sizeof(buf), ",%.17g", cum_incidence_[m][k]);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace ciftree
