#pragma once

#include <algorithm>
#include <cmath>

#include "scg/errors.hpp"

namespace scg {

enum class ScheduleMode { TempMatch, TauAnneal, Constant };

// beta_t = tau * (1 - e^{-t*gamma}): inverse exponential ramp of the Gumbel
// scale toward (but never reaching) tau.
inline double temp_match_beta(long t, double tau, double gamma) {
  if (!(tau > 0.0) || !(gamma > 0.0)) {
    throw ContractError("temp_match_beta: tau and gamma must be positive");
  }
  double beta = tau * (1.0 - std::exp(-static_cast<double>(t) * gamma));
  // Strictly below tau even once the exponential underflows.
  if (beta >= tau) beta = std::nextafter(tau, 0.0);
  return beta;
}

// alpha_t = min(1, rate * t): clamped linear ramp of the residual-dropout
// probability from 0 to 1.
inline double dropres_alpha(long t, double rate) {
  if (!(rate > 0.0)) throw ContractError("dropres_alpha: rate must be positive");
  return std::min(1.0, rate * static_cast<double>(t));
}

// tau_t = max(floor, tau0 * e^{-t*gamma}): the baseline temperature-annealing
// schedule.
inline double tau_anneal(long t, double tau0, double gamma, double floor_value) {
  if (!(floor_value > 0.0) || tau0 < floor_value) {
    throw ContractError("tau_anneal: need tau0 >= floor > 0");
  }
  if (!(gamma > 0.0)) throw ContractError("tau_anneal: gamma must be positive");
  return std::max(floor_value, tau0 * std::exp(-static_cast<double>(t) * gamma));
}

// Training-step schedule state. The counter t advances only when
// epoch_fraction crosses one of the updates_per_epoch cadence points, per the
// "updated N times per epoch" convention.
struct ScheduleState {
  ScheduleMode mode = ScheduleMode::TempMatch;
  double tau = 1.0;
  double gamma = 0.008;
  int updates_per_epoch = 10;

  // Residual-dropout gate configuration. With dropres disabled alpha is
  // pinned to 1 (the residual is never used); with the ramp disabled alpha
  // stays at alpha_const.
  bool dropres = true;
  bool alpha_ramp = true;
  double alpha_rate = 0.002;
  double alpha_const = 0.0;

  double beta_const = 1.0;  // beta under TauAnneal / Constant
  double tau_floor = 1.0;   // floor under TauAnneal

  long t = 0;

  struct Values {
    double beta = 0.0;
    double alpha = 0.0;
    double tau = 1.0;
  };

  Values current() const {
    Values v;
    switch (mode) {
      case ScheduleMode::TempMatch:
        v.beta = temp_match_beta(t, tau, gamma);
        v.tau = tau;
        break;
      case ScheduleMode::TauAnneal:
        v.beta = beta_const;
        v.tau = tau_anneal(t, tau, gamma, tau_floor);
        break;
      case ScheduleMode::Constant:
        v.beta = beta_const;
        v.tau = tau;
        break;
    }
    if (!dropres) {
      v.alpha = 1.0;
    } else if (alpha_ramp) {
      v.alpha = dropres_alpha(t, alpha_rate);
    } else {
      v.alpha = alpha_const;
    }
    return v;
  }

  // Advances t past every cadence crossing at or below epoch_fraction and
  // returns the current (beta, alpha, tau) triple. epoch_fraction must be
  // nondecreasing across calls.
  Values tick(double epoch_fraction) {
    const long crossings =
        static_cast<long>(std::floor(epoch_fraction * updates_per_epoch + 1e-9));
    t = std::max(t, crossings);
    return current();
  }
};

}  // namespace scg
