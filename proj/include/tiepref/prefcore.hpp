#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "tiepref/errors.hpp"

// Closed-form preference mathematics: the Bradley-Terry (BT) win probability,
// the Rao-Kupper tie extension (BTT), the tie-collapsed win probability, and
// the preference-strength bias map between the two models. Everything here is
// a pure function of its arguments and safe to call concurrently.
//
// Conventions:
//  - rewards r1, r2 are unconstrained finite reals; probabilities come from
//    their differences only, so all formulas are evaluated shift-invariantly
//    (max subtraction / sign branching) and stay finite for |r| up to ~700;
//  - theta >= 1 is the tie propensity; theta == 1 degenerates BTT to BT and
//    is handled exactly (zero tie mass, zero bias), not as a limit.

namespace tiepref {

// Tie propensity of the BTT model. Validated on construction.
struct TieModelParams {
  double theta;

  explicit TieModelParams(double theta_value) : theta(theta_value) {
    if (!std::isfinite(theta)) {
      throw InvalidParameterError("tie parameter theta must be finite");
    }
    if (theta < 1.0) {
      throw InvalidParameterError("tie parameter theta must be >= 1, got " +
                                  std::to_string(theta));
    }
  }
};

// Preference strength: a reward difference r(x,y1) - r(x,y2). Any finite real.
using PreferenceStrength = double;

namespace detail {

inline void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw DomainError(std::string(what) + " must be finite");
  }
}

}  // namespace detail

// Stable logistic; exact 0.5 at zero, no overflow for any finite argument.
inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// -log(logistic(z)), evaluated without forming the probability.
inline double neg_log_logistic(double z) {
  return z > 0.0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

// BT win probability sigma(delta_r) = exp(delta_r) / (1 + exp(delta_r)).
inline double bt_win_prob(PreferenceStrength delta_r) {
  detail::require_finite(delta_r, "preference strength");
  return logistic(delta_r);
}

// BTT win probability exp(r1) / (exp(r1) + theta * exp(r2)).
// Subtracting max(r1, r2) before exponentiating makes the result exactly
// invariant under a common shift of both rewards.
inline double btt_win_prob(double r1, double r2, TieModelParams params) {
  detail::require_finite(r1, "reward r1");
  detail::require_finite(r2, "reward r2");
  const double m = std::max(r1, r2);
  const double ea = std::exp(r1 - m);
  const double eb = std::exp(r2 - m);
  return ea / (ea + params.theta * eb);
}

// BTT tie probability
//   (theta^2 - 1) exp(r1) exp(r2)
//   -----------------------------------------------
//   (exp(r1) + theta exp(r2)) (theta exp(r1) + exp(r2))
// Exactly zero when theta == 1, and exactly symmetric in (r1, r2).
inline double btt_tie_prob(double r1, double r2, TieModelParams params) {
  detail::require_finite(r1, "reward r1");
  detail::require_finite(r2, "reward r2");
  const double th = params.theta;
  const double m = std::max(r1, r2);
  const double ea = std::exp(r1 - m);
  const double eb = std::exp(r2 - m);
  const double num = (th * th - 1.0) * (ea * eb);
  return num / ((ea + th * eb) * (th * ea + eb));
}

// Win probability after ties are split evenly: win + tie / 2.
inline double collapsed_win_prob(double r1, double r2, TieModelParams params) {
  return btt_win_prob(r1, r2, params) + 0.5 * btt_tie_prob(r1, r2, params);
}

// Supremum of |bias_term| over all finite preference strengths:
// log((1 + theta^2) / (2 theta)). Zero iff theta == 1.
inline double bias_bound(TieModelParams params) {
  const double th = params.theta;
  return std::log((1.0 + th * th) / (2.0 * th));
}

// The preference-strength gap incurred by fitting BT to tie-broken BTT data:
//   bias(x) = log((2 theta + (1+theta^2) e^{-x}) / (1+theta^2 + 2 theta e^{-x}))
// Its sign is opposite to x, it is exactly odd, and |bias| < bias_bound.
// Evaluated at e^{-|x|} so neither branch can overflow.
inline double bias_term(PreferenceStrength delta_r_star, TieModelParams params) {
  detail::require_finite(delta_r_star, "preference strength");
  const double th = params.theta;
  const double u = std::exp(-std::abs(delta_r_star));
  const double t_num = 2.0 * th + (1.0 + th * th) * u;
  const double t_den = (1.0 + th * th) + 2.0 * th * u;
  const double mag = std::log(t_num / t_den);  // <= 0
  return delta_r_star >= 0.0 ? mag : -mag + 0.0;  // +0.0 keeps zeros unsigned
}

// d bias_term / d delta_r_star. Numerator simplifies to
// -(theta-1)^2 (theta+1)^2 e^{-x}; always in (-(th-1)^2/(th+1)^2, 0].
inline double bias_term_derivative(PreferenceStrength delta_r_star,
                                   TieModelParams params) {
  detail::require_finite(delta_r_star, "preference strength");
  const double th = params.theta;
  const double c = 1.0 + th * th;
  const double scale = (th - 1.0) * (th - 1.0) * (th + 1.0) * (th + 1.0);
  if (delta_r_star >= 0.0) {
    const double u = std::exp(-delta_r_star);
    return -u * scale / ((2.0 * th + c * u) * (c + 2.0 * th * u));
  }
  const double e = std::exp(delta_r_star);
  return -e * scale / ((2.0 * th * e + c) * (c * e + 2.0 * th));
}

// The strength a BT fit converges to on tie-broken BTT data whose true
// strength is delta_r_star. Strictly increasing and exactly odd.
inline PreferenceStrength forward_bias_map(PreferenceStrength delta_r_star,
                                           TieModelParams params) {
  return delta_r_star + bias_term(delta_r_star, params);
}

// Inverse of forward_bias_map by bisection. The bias bound guarantees the
// root lies in [delta_r_hat - bound, delta_r_hat + bound]; the bracket is
// shrunk to an absolute width of 1e-10.
inline PreferenceStrength invert_bias_map(PreferenceStrength delta_r_hat,
                                          TieModelParams params) {
  detail::require_finite(delta_r_hat, "preference strength");
  if (params.theta == 1.0) return delta_r_hat;
  const double bound = bias_bound(params);
  double lo = delta_r_hat - bound;
  double hi = delta_r_hat + bound;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= 1e-10) return mid;
    if (forward_bias_map(mid, params) < delta_r_hat) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw NumericError("bias-map inversion did not converge in 200 iterations");
}

}  // namespace tiepref
