#include "ciftree/censoring.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace ciftree {

CensoringModel fit_km(const Dataset& data) {
  // Tally events and censorings per distinct follow-up time.
  std::map<double, std::pair<int, int>> counts;  // time -> (censored, events)
  for (const Observation& o : data.observations) {
    auto& c = counts[o.time];
    if (o.delta == 0) {
      c.first += 1;
    } else {
      c.second += 1;
    }
  }
  CensoringModel model;
  int at_risk = data.n();
  double surv = 1.0;
  for (const auto& [time, c] : counts) {
    const auto [censored, events] = c;
    if (censored > 0) {
      const int risk = at_risk - events;  // events precede censorings
      const double hazard = static_cast<double>(censored) / risk;
      surv *= 1.0 - hazard;
      model.jump_times.push_back(time);
      model.hazard_increments.push_back(hazard);
      model.n_at_risk.push_back(risk);
      model.survival.push_back(surv);
    }
    at_risk -= censored + events;
  }
  return model;
}

double ipcw_weight(const CensoringModel& model, double time, int delta, double t_star,
                   double floor) {
  const bool complete = (delta == 1) || (time >= t_star);
  if (!complete) return 0.0;
  const double eval = std::min(time, t_star);
  const double g = model.survival_at(eval, true);
  if (floor > 0.0 && g < floor) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "censoring survival %.6g below floor %.3g at time %.6g; truncation required",
                  g, floor, eval);
    throw positivity_error(buf);
  }
  return 1.0 / g;
}

double choose_tau(const CensoringModel& model, const Dataset& data, double floor) {
  if (!(floor > 0.0 && floor < 1.0) && floor != 1.0) {
    throw error("positivity floor must lie in (0, 1]");
  }
  double max_time = 0.0;
  for (const Observation& o : data.observations) max_time = std::max(max_time, o.time);
  if (model.survival_at(max_time, true) >= floor) {
    return std::numeric_limits<double>::infinity();
  }
  // survival(s-) equals survival[k-1] on (u_{k-1}, u_k]; the largest valid
  // horizon is the jump where the post-jump value first drops below the floor.
  for (size_t k = 0; k < model.jump_times.size(); ++k) {
    if (model.survival[k] < floor) return model.jump_times[k];
  }
  return std::numeric_limits<double>::infinity();
}

void save_censoring_curve_csv(const CensoringModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw csv_error("cannot write " + path);
  out << "time,survival\n";
  out << "0,1\n";
  char buf[80];
  for (size_t k = 0; k < model.jump_times.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", model.jump_times[k], model.survival[k]);
    out << buf;
  }
}

}  // namespace ciftree
