#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "tiepref/dataset.hpp"
#include "tiepref/errors.hpp"
#include "tiepref/prefcore.hpp"
#include "tiepref/reward.hpp"
#include "tiepref/rng.hpp"
#include "tiepref/train.hpp"

// Exact-expectation fits on a one-prompt, three-response world with a known
// tabular ground truth. Label weights are the analytic BTT probabilities (the
// tie-collapsed ones for the tie-broken datasets) — no sampling anywhere.
//
// Each unordered pair is fitted on its own two-entry table. The collapsed win
// probabilities of three mutually compared responses have non-additive
// log-odds, so no single per-response score table can match all of them at
// once; the pairwise optimum is the well-defined object the fits converge to.

namespace tiepref::testsupport {

struct PairFit {
  double delta_star = 0.0;        // true strength of the pair
  double fitted_bt = 0.0;         // expected BT loss on tie-broken weights
  double fitted_corrected = 0.0;  // expected bias-corrected loss, same weights
  double fitted_btt = 0.0;        // expected BTT loss on tied weights
};

inline std::array<double, 3> random_truth_scores(std::uint64_t seed) {
  Rng rng = substream(seed, "exact-truth");
  return {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
          rng.uniform(-2.0, 2.0)};
}

namespace detail {

// Bisects d(expected loss)/d(delta) over a bracket that the losses' convexity
// makes valid; returns the argmin strength.
template <typename GradFn>
double bisect_gradient_root(GradFn&& grad) {
  double lo = -60.0, hi = 60.0;
  if (!(grad(lo) < 0.0 && grad(hi) > 0.0)) {
    throw NumericError("expected-loss gradient has no sign change");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (grad(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Fits one pair with the given loss on analytically weighted records.
// The model is a two-entry table holding the pair's scores (+-delta/2).
inline double fit_pair(LossKind kind, TieModelParams params,
                       std::span<const ComparisonRecord> records,
                       std::span<const double> weights) {
  TabularReward table;
  const auto& a = records.front().response_a;
  const auto& b = records.front().response_b;
  table.set_entry(a.prompt_id, a.features, 0.0);
  table.set_entry(b.prompt_id, b.features, 0.0);
  std::vector<double> grad(2);
  return detail::bisect_gradient_root([&](double d) {
    const std::array<double, 2> psi = {0.5 * d, -0.5 * d};
    table.set_params(psi);
    loss_gradient(kind, table, params, records, weights, grad,
                  CorrectionGradient::Detached, Exec::Serial);
    return 0.5 * (grad[0] - grad[1]);  // d(loss)/d(delta)
  });
}

inline std::vector<PairFit> fit_exact_instance(
    const std::array<double, 3>& truth_scores, TieModelParams params) {
  constexpr PromptId kPrompt = 0;
  std::vector<PairFit> fits;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = i + 1; j < 3; ++j) {
      ComparisonRecord base;
      base.prompt_id = kPrompt;
      base.response_a = {kPrompt, {static_cast<Feature>(i)}};
      base.response_b = {kPrompt, {static_cast<Feature>(j)}};

      const double r_i = truth_scores[i];
      const double r_j = truth_scores[j];
      const double p_win = btt_win_prob(r_i, r_j, params);
      const double p_lose = btt_win_prob(r_j, r_i, params);
      const double p_tie = btt_tie_prob(r_i, r_j, params);
      const double q = collapsed_win_prob(r_i, r_j, params);

      ComparisonRecord win = base, lose = base, tie = base;
      win.label = PreferenceLabel::FirstWins;
      lose.label = PreferenceLabel::SecondWins;
      tie.label = PreferenceLabel::Tie;

      PairFit fit;
      fit.delta_star = r_i - r_j;
      {
        const std::array records = {win, lose};
        const std::array weights = {q, 1.0 - q};
        fit.fitted_bt = fit_pair(LossKind::Bt, params, records, weights);
        fit.fitted_corrected =
            fit_pair(LossKind::BiasCorrected, params, records, weights);
      }
      {
        const std::array records = {win, lose, tie};
        const std::array weights = {p_win, p_lose, p_tie};
        fit.fitted_btt = fit_pair(LossKind::Btt, params, records, weights);
      }
      fits.push_back(fit);
    }
  }
  return fits;
}

}  // namespace tiepref::testsupport
