// Compares the serial reference kernels against their OpenMP versions on the
// hot paths: loss evaluation, batch gradients, dataset generation and
// tie-breaking. Results must agree bitwise; only the wall time may differ.
//
//   ./tiepref_bench [n_records]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "tiepref/dataset.hpp"
#include "tiepref/experiments.hpp"
#include "tiepref/reward.hpp"
#include "tiepref/train.hpp"

using namespace tiepref;

namespace {

template <typename Fn>
double time_ms(Fn&& fn, int reps) {
  // One warmup, then best-of-reps.
  fn();
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best,
                    std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool identical) {
  std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bitwise-equal" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t n_records = argc > 1 ? std::strtoull(argv[1], nullptr, 10)
                                         : 200'000;
  const std::size_t n_prompts = 64;
  const std::size_t pairs = n_records / n_prompts;

#ifdef _OPENMP
  std::printf("OpenMP: %d threads\n", omp_get_max_threads());
#else
  std::printf("OpenMP: not enabled (serial build)\n");
#endif
  std::printf("records: %zu (%zu prompts x %zu pairs)\n\n", n_prompts * pairs,
              n_prompts, pairs);

  const TieModelParams params(3.0);
  const auto truth = random_ground_truth(2, n_prompts, 1);

  PreferenceDataset tied_serial, tied_parallel;
  const double gen_s = time_ms(
      [&] {
        tied_serial = generate_synthetic(n_prompts, pairs, 2, truth, params, 2,
                                         Exec::Serial);
      },
      3);
  const double gen_p = time_ms(
      [&] {
        tied_parallel = generate_synthetic(n_prompts, pairs, 2, truth, params,
                                           2, Exec::Parallel);
      },
      3);
  report("generate_synthetic", gen_s, gen_p, tied_serial == tied_parallel);

  PreferenceDataset broken_serial, broken_parallel;
  const double brk_s = time_ms(
      [&] { broken_serial = break_ties(tied_serial, 3, Exec::Serial); }, 3);
  const double brk_p = time_ms(
      [&] { broken_parallel = break_ties(tied_serial, 3, Exec::Parallel); }, 3);
  report("break_ties", brk_s, brk_p, broken_serial == broken_parallel);

  MlpReward model(2, 32, n_prompts, 4);

  double loss_serial = 0.0, loss_parallel = 0.0;
  const double btt_s = time_ms(
      [&] {
        loss_serial = nll_btt(model, params, tied_serial.records, {},
                              Exec::Serial);
      },
      5);
  const double btt_p = time_ms(
      [&] {
        loss_parallel = nll_btt(model, params, tied_serial.records, {},
                                Exec::Parallel);
      },
      5);
  report("nll_btt (full dataset)", btt_s, btt_p, loss_serial == loss_parallel);

  const double bt_s = time_ms(
      [&] {
        loss_serial = nll_bt(model, broken_serial.records, {}, Exec::Serial);
      },
      5);
  const double bt_p = time_ms(
      [&] {
        loss_parallel =
            nll_bt(model, broken_serial.records, {}, Exec::Parallel);
      },
      5);
  report("nll_bt (full dataset)", bt_s, bt_p, loss_serial == loss_parallel);

  std::vector<double> grad_serial(model.param_count());
  std::vector<double> grad_parallel(model.param_count());
  const std::size_t batch = std::min<std::size_t>(4096, n_records);
  const std::span<const ComparisonRecord> batch_records(
      broken_serial.records.data(), batch);
  const double grad_s = time_ms(
      [&] {
        loss_gradient(LossKind::Bt, model, params, batch_records, {},
                      grad_serial, CorrectionGradient::Detached, Exec::Serial);
      },
      5);
  const double grad_p = time_ms(
      [&] {
        loss_gradient(LossKind::Bt, model, params, batch_records, {},
                      grad_parallel, CorrectionGradient::Detached,
                      Exec::Parallel);
      },
      5);
  report("loss_gradient (4k batch)", grad_s, grad_p,
         grad_serial == grad_parallel);

  const auto eval_pairs = draw_response_pairs(n_prompts, 256, 2, 5);
  double bias_serial = 0.0, bias_parallel = 0.0;
  const double eval_s = time_ms(
      [&] {
        bias_serial =
            eval_mean_abs_bias(model, truth, eval_pairs, Exec::Serial);
      },
      5);
  const double eval_p = time_ms(
      [&] {
        bias_parallel =
            eval_mean_abs_bias(model, truth, eval_pairs, Exec::Parallel);
      },
      5);
  report("eval_mean_abs_bias", eval_s, eval_p, bias_serial == bias_parallel);

  return 0;
}
