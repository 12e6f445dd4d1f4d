#include "ndop/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ndop/error.hpp"

namespace ndop {

void HybridConfig::validate() const {
  if (total_epochs < 1) throw InvalidArgument("hybrid: total_epochs (N) must be >= 1");
  if (eki_every < 1) throw InvalidArgument("hybrid: eki_every (k) must be >= 1");
  if (!(rho > 0.0)) throw InvalidArgument("hybrid: rho must be positive");
  if (short_eval_windows < 1) throw InvalidArgument("hybrid: short_eval_windows must be >= 1");
  if (sgd.schedule != LrSchedule::kConstant) throw InvalidArgument("hybrid: the SGD schedule must be constant");
}

ShortTermScorer::ShortTermScorer(FieldFactory factory, std::vector<Trajectory> windows, double dt_internal)
    : factory_(std::move(factory)), windows_(std::move(windows)), dt_internal_(dt_internal) {
  if (windows_.empty()) throw InvalidArgument("short-term scorer: no windows");
}

double ShortTermScorer::operator()(const ParamVector& theta) const {
  const auto f = factory_(theta);
  try {
    return evaluate_short_term(*f, windows_, 0.0, dt_internal_).relative;
  } catch (const BlowUpError&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::vector<Trajectory> sample_windows(const std::vector<Trajectory>& data, double horizon, int count, Rng& rng) {
  if (data.empty()) throw InvalidArgument("sample_windows: no data");
  std::vector<Trajectory> out;
  for (int i = 0; i < count; ++i) {
    const Trajectory& t = data[data.size() == 1 ? 0 : rng.uniform_index(data.size())];
    std::size_t len = t.size();
    if (horizon > 0.0 && t.size() >= 2) {
      len = std::min(t.size(), static_cast<std::size_t>(std::llround(horizon / (t.times[1] - t.times[0]))) + 1);
    }
    const std::size_t start = len < t.size() ? rng.uniform_index(t.size() - len + 1) : 0;
    out.push_back(t.slice(start, len));
  }
  return out;
}

HybridResult hybrid_train(const FieldFactory& factory, const ParamVector& pretrained,
                          const std::vector<Trajectory>& data, const ForwardMap& fmap, const Observation& y,
                          const HybridConfig& cfg, const HybridCallback& on_eki_epoch) {
  cfg.validate();
  const Rng root(cfg.sgd.seed);
  Rng window_rng = root.split(0x5C0BE);
  const ShortTermScorer scorer(factory, sample_windows(data, cfg.sgd.horizon, cfg.short_eval_windows, window_rng),
                               cfg.sgd.dt_internal);

  HybridResult out;
  out.params = pretrained;
  out.pretrained_short_error = scorer(pretrained);
  {
    const Observation g = fmap.evaluate(pretrained);
    double se = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) se += (g[i] - y[i]) * (g[i] - y[i]);
    out.pretrained_long_error = se / static_cast<double>(g.size());
  }

  SgdConfig sgd = cfg.sgd;
  AdamState adam(pretrained.size());
  int done = 0;
  int eki_epoch = 0;
  while (done < cfg.total_epochs) {
    const int chunk_end = std::min(cfg.total_epochs, done + cfg.eki_every);
    sgd.epochs = chunk_end;
    TrainResult tr = train_short_term(factory, out.params, data, sgd, TrainResume{done, adam});
    out.history.sgd.insert(out.history.sgd.end(), tr.history.begin(), tr.history.end());
    out.params = std::move(tr.params);
    adam = std::move(tr.adam);
    if (tr.failure) {
      out.history.failures.push_back("sgd: " + *tr.failure);
      break;
    }
    done = chunk_end;
    if (done % cfg.eki_every != 0) break;

    ++eki_epoch;
    EkiConfig eki = cfg.eki;
    eki.seed = mix_seed(cfg.eki.seed, static_cast<std::uint64_t>(eki_epoch));
    try {
      EkiRun run = run_eki(fmap, out.params, y, eki, EkiRunOptions{std::cref(scorer)});
      for (auto& it : run.iterates) {
        out.history.eki.push_back({done, eki_epoch, it.iteration, it.short_error, it.long_error, std::move(it.mean)});
      }
      out.params = out.history.eki.back().mean;
    } catch (const Error& err) {
      std::ostringstream msg;
      msg << "eki epoch " << eki_epoch << " after " << done << " sgd epochs: " << err.what();
      out.history.failures.push_back(msg.str());
    }
    if (on_eki_epoch) on_eki_epoch(eki_epoch, out.history);
  }
  return out;
}

std::size_t select_checkpoint(const std::vector<EkiRecord>& records, double reference_short, double rho) {
  if (records.empty()) throw InvalidArgument("select_checkpoint: empty history");
  const double limit = rho * reference_short;
  std::size_t best = records.size();
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!(records[i].short_error <= limit)) continue;
    if (best == records.size() || records[i].long_error < records[best].long_error) best = i;
  }
  if (best != records.size()) return best;
  best = 0;
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].short_error < records[best].short_error) best = i;
  }
  return best;
}

}  // namespace ndop
