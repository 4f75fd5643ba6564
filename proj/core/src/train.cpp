#include "speedbias/train.hpp"

#include <cmath>
#include <ostream>
#include <random>

#include "speedbias/errors.hpp"

namespace speedbias::nmt {

TrainResult train_model(Params& params, const std::vector<ExamplePair>& corpus,
                        const TrainOptions& opts) {
  TrainResult res;
  if (opts.steps < 0) throw DataError("train: negative step count");
  if (opts.steps == 0) return res;
  if (corpus.empty()) throw DataError("train: empty corpus");
  if (opts.batch_size < 1) throw DataError("train: batch size must be >= 1");

  const std::ptrdiff_t n = params.layout.total_size();
  Vec grad(n), m = Vec::Zero(n), v = Vec::Zero(n);
  std::mt19937_64 rng(opts.sampler_seed);

  for (int step = 1; step <= opts.steps; ++step) {
    std::vector<ExamplePair> batch;
    batch.reserve(opts.batch_size);
    for (int i = 0; i < opts.batch_size; ++i)
      batch.push_back(corpus[rng() % corpus.size()]);

    double loss = loss_and_grad(params, batch, grad);
    if (step == 1) res.first_loss = loss;
    res.final_loss = loss;
    bool warm = step > opts.warmup_steps;
    if (!std::isfinite(loss) || (warm && loss > opts.divergence_loss))
      throw RunError("training diverged at step " + std::to_string(step) +
                     " (loss " + std::to_string(loss) + ")");

    double gnorm = grad.norm();
    if (opts.clip_norm > 0 && gnorm > opts.clip_norm)
      grad *= opts.clip_norm / gnorm;

    double warmup = std::max(1, opts.warmup_steps);
    double factor = std::min(step / warmup, std::sqrt(warmup / step));
    double lr = opts.learning_rate * factor;

    m = opts.beta1 * m + (1.0 - opts.beta1) * grad;
    v = (opts.beta2 * v.array() + (1.0 - opts.beta2) * grad.array().square())
            .matrix();
    double bc1 = 1.0 - std::pow(opts.beta1, step);
    double bc2 = 1.0 - std::pow(opts.beta2, step);
    params.flat.array() -=
        lr * (m.array() / bc1) /
        ((v.array() / bc2).sqrt() + opts.adam_eps);

    res.steps_completed = step;
    if (opts.log && opts.log_every > 0 &&
        (step % opts.log_every == 0 || step == opts.steps))
      *opts.log << "step " << step << " loss " << loss << " lr " << lr << "\n";
  }
  return res;
}

}  // namespace speedbias::nmt
