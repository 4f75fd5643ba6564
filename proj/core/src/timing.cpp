#include "speedbias/timing.hpp"

#include <algorithm>
#include <chrono>

#include "speedbias/decode.hpp"
#include "speedbias/errors.hpp"

namespace speedbias::nmt {

TimedDecode time_decode(const Params& params,
                        const std::vector<std::vector<int>>& sources,
                        const TimingOptions& opts) {
  if (opts.repetitions < 1) throw DataError("timing: repetitions must be >= 1");
  TimedDecode res;
  res.sentences = static_cast<long>(sources.size());
  if (sources.empty()) return res;

  auto pass = [&]() {
    std::vector<std::vector<int>> outs;
    outs.reserve(sources.size());
    for (const auto& src : sources)
      outs.push_back(decode(params, src, opts.beam_size, opts.max_len).tokens);
    return outs;
  };

  for (int i = 0; i < opts.warmup_passes; ++i) pass();
  for (int i = 0; i < opts.repetitions; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    auto outs = pass();
    auto t1 = std::chrono::steady_clock::now();
    res.repetition_seconds.push_back(
        std::chrono::duration<double>(t1 - t0).count());
    if (i == 0) res.outputs = std::move(outs);
  }
  std::vector<double> sorted = res.repetition_seconds;
  std::sort(sorted.begin(), sorted.end());
  std::size_t n = sorted.size();
  res.seconds = n % 2 == 1 ? sorted[n / 2]
                           : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return res;
}

}  // namespace speedbias::nmt
