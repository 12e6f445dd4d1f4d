#include "cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "cli/io.hpp"
#include "ndop/array_file.hpp"
#include "ndop/eki.hpp"
#include "ndop/error.hpp"
#include "ndop/fno.hpp"
#include "ndop/hybrid.hpp"
#include "ndop/rng.hpp"
#include "ndop/stats.hpp"
#include "ndop/train.hpp"

namespace ndop::cli {

using nlohmann::json;

namespace {

std::string numbered(const std::string& prefix, std::size_t i, int width, const std::string& suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return prefix + buf + suffix;
}

fs::path ensure_dir(const fs::path& p) {
  fs::create_directories(p);
  return p;
}

std::vector<Trajectory> at_resolution(const std::vector<Trajectory>& data, const Resolution& r) {
  std::vector<Trajectory> out;
  out.reserve(data.size());
  for (const auto& t : data) out.push_back(r.apply(t));
  return out;
}

double observation_gap(const std::vector<Trajectory>& data) {
  for (const auto& t : data) {
    if (t.size() >= 2) return t.times[1] - t.times[0];
  }
  throw InvalidArgument("trajectories need at least two snapshots at this resolution");
}

double internal_dt(const std::vector<Trajectory>& data, int substeps) {
  return observation_gap(data) / substeps;
}

// Fails early (with the library's diagnostic) when the model cannot run on
// the data's grid.
void check_model_fits(const FnoParams& params, const std::vector<Trajectory>& data, const std::string& what) {
  if (data.empty()) throw InvalidArgument(what + ": no trajectories");
  const Grid& g = data.front().grid;
  if (g.dims() != params.spec.dims) {
    throw ShapeError(what + ": data is " + std::to_string(g.dims()) + "-D but the model is " +
                     std::to_string(params.spec.dims) + "-D");
  }
  try {
    (void)fno_forward(params, data.front().states.front());
  } catch (const Error& e) {
    throw InvalidArgument(what + ": model does not fit the data grid: " + e.what());
  }
}

json resolution_json(const Resolution& r, const std::vector<Trajectory>& data, double dt) {
  const Grid& g = data.front().grid;
  json n = json::array();
  for (int d = 0; d < g.dims(); ++d) n.push_back(g.n(d));
  return {{"space_stride", r.space_stride}, {"time_stride", r.time_stride}, {"substeps", r.substeps},
          {"n", n},                          {"dt_obs", observation_gap(data)},  {"dt_internal", dt}};
}

fs::path default_model(const fs::path& out) {
  const fs::path selected = out / "hybrid" / "selected.nd";
  if (fs::exists(selected)) return selected;
  return out / "train" / "checkpoint.nd";
}

// ---- statistics shared by evaluate and stats

struct StatBundle {
  SpectrumCurve spectrum;
  SampleCloud u, ux, uxx, joint;
  std::vector<double> acf_time, acf_space;
  double dt_obs = 0.0;
  double dx = 0.0;
};

// With `skip_initial` the point samples leave out each trajectory's first
// snapshot, which a prediction shares exactly with its truth.
StatBundle collect_stats(const std::vector<Trajectory>& trajs, int max_lag, bool skip_initial = false) {
  StatBundle b;
  std::vector<SpectrumCurve> curves;
  std::size_t time_lag = static_cast<std::size_t>(max_lag);
  for (const auto& t : trajs) time_lag = std::min(time_lag, t.size() - 1);
  const int space_lag = trajs.front().grid.n(0) / 2;
  b.acf_time.assign(time_lag + 1, 0.0);
  b.acf_space.assign(static_cast<std::size_t>(space_lag) + 1, 0.0);
  for (const auto& t : trajs) {
    for (std::size_t i = 0; i < t.size(); ++i) curves.push_back(energy_spectrum(t.states[i], t.times[i]));
    auto append = [](SampleCloud& dst, const SampleCloud& src) {
      dst.dim = src.dim;
      dst.points.insert(dst.points.end(), src.points.begin(), src.points.end());
    };
    const Trajectory pts = skip_initial && t.size() > 1 ? t.slice(1, t.size() - 1) : t;
    append(b.u, derivative_samples(pts, 0));
    append(b.ux, derivative_samples(pts, 1));
    append(b.uxx, derivative_samples(pts, 2));
    append(b.joint, joint_derivative_samples(pts));
    if (time_lag > 0) {
      const auto a = acf(t, AcfAxis::kTemporal, static_cast<int>(time_lag));
      for (std::size_t l = 0; l < a.size(); ++l) b.acf_time[l] += a[l] / static_cast<double>(trajs.size());
    }
    const auto s = acf(t, AcfAxis::kSpatial, space_lag);
    for (std::size_t l = 0; l < s.size(); ++l) b.acf_space[l] += s[l] / static_cast<double>(trajs.size());
  }
  b.spectrum = mean_spectrum(curves);
  b.dt_obs = trajs.front().size() >= 2 ? trajs.front().times[1] - trajs.front().times[0] : 0.0;
  b.dx = trajs.front().grid.spacing(0);
  return b;
}

// Every stride-th point so that at most `cap` remain.
SampleCloud thinned(const SampleCloud& c, std::size_t cap) {
  const std::size_t n = c.size();
  if (n <= cap) return c;
  const std::size_t stride = (n + cap - 1) / cap;
  SampleCloud out;
  out.dim = c.dim;
  for (std::size_t i = 0; i < n; i += stride) {
    for (int d = 0; d < c.dim; ++d) out.points.push_back(c.points[i * static_cast<std::size_t>(c.dim) + static_cast<std::size_t>(d)]);
  }
  return out;
}

std::pair<double, double> range_of(const std::vector<const SampleCloud*>& clouds, int axis) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* c : clouds) {
    for (std::size_t i = 0; i < c->size(); ++i) {
      const double v = c->points[i * static_cast<std::size_t>(c->dim) + static_cast<std::size_t>(axis)];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!(hi > lo)) hi = lo + 1.0;
  // Keep the maximum inside the half-open last bin.
  return {lo, hi + 1e-9 * (hi - lo)};
}

// One density column per cloud, all binned over the union range.
void write_pdf_1d(const fs::path& path, const std::vector<std::string>& names,
                  const std::vector<const SampleCloud*>& clouds, int bins, std::vector<fs::path>& outputs) {
  const auto [lo, hi] = range_of(clouds, 0);
  const std::vector<int> nb{bins};
  const std::vector<double> vlo{lo}, vhi{hi};
  std::vector<Histogram> hs;
  for (const auto* c : clouds) hs.push_back(histogram(*c, nb, vlo, vhi));
  std::vector<std::string> header{"value"};
  header.insert(header.end(), names.begin(), names.end());
  CsvWriter csv(path, header);
  const double w = (hi - lo) / bins;
  for (int i = 0; i < bins; ++i) {
    std::vector<double> row{lo + (i + 0.5) * w};
    for (const auto& h : hs) row.push_back(h.density[static_cast<std::size_t>(i)]);
    csv.row(row);
  }
  outputs.push_back(path);
}

void write_pdf_joint(const fs::path& path, const std::vector<std::string>& names,
                     const std::vector<const SampleCloud*>& clouds, int bins, std::vector<fs::path>& outputs) {
  const auto [lo0, hi0] = range_of(clouds, 0);
  const auto [lo1, hi1] = range_of(clouds, 1);
  const std::vector<int> nb{bins, bins};
  const std::vector<double> vlo{lo0, lo1}, vhi{hi0, hi1};
  std::vector<Histogram> hs;
  for (const auto* c : clouds) hs.push_back(histogram(*c, nb, vlo, vhi));
  std::vector<std::string> header{"u_x", "u_xx"};
  header.insert(header.end(), names.begin(), names.end());
  CsvWriter csv(path, header);
  const double w0 = (hi0 - lo0) / bins, w1 = (hi1 - lo1) / bins;
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      std::vector<double> row{lo0 + (i + 0.5) * w0, lo1 + (j + 0.5) * w1};
      for (const auto& h : hs) row.push_back(h.density[static_cast<std::size_t>(i * bins + j)]);
      csv.row(row);
    }
  }
  outputs.push_back(path);
}

void write_stat_csvs(const fs::path& dir, const std::vector<std::string>& names,
                     const std::vector<const StatBundle*>& bundles, int bins, std::vector<fs::path>& outputs) {
  {
    std::vector<std::string> header{"k"};
    header.insert(header.end(), names.begin(), names.end());
    CsvWriter csv(dir / "spectrum.csv", header);
    const auto& k = bundles.front()->spectrum.k;
    for (std::size_t i = 0; i < k.size(); ++i) {
      std::vector<double> row{k[i]};
      for (const auto* b : bundles) row.push_back(i < b->spectrum.energy.size() ? b->spectrum.energy[i] : 0.0);
      csv.row(row);
    }
    outputs.push_back(dir / "spectrum.csv");
  }
  auto clouds = [&](SampleCloud StatBundle::*m) {
    std::vector<const SampleCloud*> out;
    for (const auto* b : bundles) out.push_back(&(b->*m));
    return out;
  };
  write_pdf_1d(dir / "pdf_u.csv", names, clouds(&StatBundle::u), bins, outputs);
  write_pdf_1d(dir / "pdf_u_x.csv", names, clouds(&StatBundle::ux), bins, outputs);
  write_pdf_1d(dir / "pdf_u_xx.csv", names, clouds(&StatBundle::uxx), bins, outputs);
  write_pdf_joint(dir / "pdf_joint.csv", names, clouds(&StatBundle::joint), std::max(1, bins / 2), outputs);
  auto acf_csv = [&](const std::string& file, const std::string& unit, std::vector<double> StatBundle::*m,
                     double step) {
    std::vector<std::string> header{"lag", unit};
    header.insert(header.end(), names.begin(), names.end());
    CsvWriter csv(dir / file, header);
    std::size_t len = std::numeric_limits<std::size_t>::max();
    for (const auto* b : bundles) len = std::min(len, (b->*m).size());
    for (std::size_t l = 0; l < len; ++l) {
      std::vector<double> row;
      for (const auto* b : bundles) row.push_back((b->*m)[l]);
      csv.row({static_cast<long long>(l)}, [&] {
        std::vector<double> r{static_cast<double>(l) * step};
        r.insert(r.end(), row.begin(), row.end());
        return r;
      }());
    }
    outputs.push_back(dir / file);
  };
  acf_csv("acf_time.csv", "time_lag", &StatBundle::acf_time, bundles.front()->dt_obs);
  acf_csv("acf_space.csv", "distance", &StatBundle::acf_space, bundles.front()->dx);
}

json moments_json(const SampleCloud& c) {
  const Moments m = moments(c.points);
  return {{"mean", m.mean}, {"variance", m.variance}, {"skewness", m.skewness}, {"excess_kurtosis", m.excess_kurtosis}};
}

// Rewrites loss.csv keeping only rows for epochs before `first_epoch`.
void truncate_loss_csv(const fs::path& path, int first_epoch) {
  std::ifstream in(path);
  if (!in) return;
  std::string header, line;
  std::getline(in, header);
  std::vector<std::string> keep;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (std::stoll(line.substr(0, line.find(','))) < first_epoch) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  out << header << '\n';
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

std::vector<Trajectory> load_split(const fs::path& data_dir, const std::string& split, std::vector<fs::path>* files) {
  if (split != "train" && split != "test") throw InvalidArgument("split must be train or test, got '" + split + "'");
  if (!fs::is_directory(data_dir)) throw IoError("data directory '" + data_dir.string() + "' does not exist");
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(data_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.starts_with(split + "_") && name.ends_with(".nd")) paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw IoError("no " + split + " trajectories in '" + data_dir.string() + "'");
  std::vector<Trajectory> out;
  for (const auto& p : paths) out.push_back(read_trajectory(p));
  if (files) files->insert(files->end(), paths.begin(), paths.end());
  return out;
}

// ------------------------------------------------------------ gen-data

void cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& opt) {
  const fs::path dir = ensure_dir(opt.out / "data");
  *opt.log << "gen-data: " << to_string(cfg.data.system.kind) << " on " << cfg.data.grid.n(0)
           << (cfg.data.grid.dims() == 2 ? "x" + std::to_string(cfg.data.grid.n(1)) : "") << " points, dt="
           << cfg.data.dt_solver << ", T=" << cfg.data.t_final << '\n';
  const Dataset ds = generate_dataset(cfg.data, Rng(cfg.data_seed), opt.threads);
  // Stale files from an earlier, larger run would otherwise be picked up.
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if ((name.starts_with("train_") || name.starts_with("test_")) && name.ends_with(".nd")) fs::remove(entry.path());
  }
  std::vector<fs::path> outputs;
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    outputs.push_back(dir / numbered("train_", i, 4, ".nd"));
    write_trajectory(outputs.back(), ds.train[i]);
  }
  for (std::size_t i = 0; i < ds.test.size(); ++i) {
    outputs.push_back(dir / numbered("test_", i, 4, ".nd"));
    write_trajectory(outputs.back(), ds.test[i]);
  }
  write_manifest(dir, "gen-data", cfg.materialized, {}, outputs,
                 {{"seeds", {{"data", cfg.data_seed}}},
                  {"solver", {{"method", "rk4"}, {"dt", cfg.data.dt_solver}, {"dealiasing", "3/2"}}},
                  {"counts", {{"train", ds.train.size()}, {"test", ds.test.size()}}}});
  *opt.log << "gen-data: wrote " << ds.train.size() << " train and " << ds.test.size() << " test trajectories to "
           << dir.string() << '\n';
}

// ------------------------------------------------------------ train

void cmd_train(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::vector<fs::path> inputs;
  const std::vector<Trajectory> data = at_resolution(load_split(opt.out / "data", "train", &inputs), cfg.train_resolution);
  const fs::path dir = ensure_dir(opt.out / "train");

  Checkpoint start;
  std::optional<TrainResume> resume;
  if (opt.resume) {
    start = read_checkpoint(*opt.resume);
    inputs.push_back(*opt.resume);
    if (!(start.params.spec == cfg.fno)) throw ConfigError("fno", "resume checkpoint was trained with a different fno spec");
    if (!start.adam) throw IoError("'" + opt.resume->string() + "' has no optimizer state; cannot resume");
    resume = TrainResume{start.epoch, *start.adam};
    *opt.log << "train: resuming after epoch " << start.epoch << '\n';
  } else {
    Rng rng(cfg.init_seed);
    start.params = fno_init(cfg.fno, rng);
  }
  check_model_fits(start.params, data, "train");

  SgdConfig sgd = cfg.sgd;
  sgd.dt_internal = internal_dt(data, cfg.train_resolution.substeps);
  sgd.threads = opt.threads;

  const fs::path loss_path = dir / "loss.csv";
  if (resume) {
    truncate_loss_csv(loss_path, resume->first_epoch);
  }
  CsvWriter loss(loss_path, {"epoch", "lr", "absolute", "relative"}, resume.has_value());
  std::vector<fs::path> outputs;
  const int log_every = std::max(1, sgd.epochs / 20);
  auto on_epoch = [&](const LossRecord& rec, const ParamVector& params, const AdamState& adam) {
    loss.row({rec.epoch}, {rec.lr, rec.absolute, rec.relative});
    const int done = rec.epoch + 1;
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < sgd.epochs) {
      const fs::path p = dir / numbered("checkpoint_epoch_", static_cast<std::size_t>(done), 6, ".nd");
      write_checkpoint(p, {FnoParams{cfg.fno, params}, done, adam});
      outputs.push_back(p);
    }
    if (done % log_every == 0) {
      *opt.log << "train: epoch " << done << "/" << sgd.epochs << " mse " << rec.absolute << " rel " << rec.relative
               << '\n';
    }
  };
  const TrainResult res =
      train_short_term(fno_factory(cfg.fno), start.params.values, data, sgd, resume, on_epoch);

  const int completed = res.history.empty() ? (resume ? resume->first_epoch : 0) : res.history.back().epoch + 1;
  const fs::path final_path = dir / "checkpoint.nd";
  write_checkpoint(final_path, {FnoParams{cfg.fno, res.params}, completed, res.adam});
  outputs.insert(outputs.begin(), final_path);
  outputs.push_back(loss_path);

  json extra = {{"seeds", {{"init", cfg.init_seed}, {"sgd", cfg.sgd.seed}}},
                {"epochs_completed", completed},
                {"dt_internal", sgd.dt_internal}};
  if (res.failure) {
    extra["failure"] = *res.failure;
    write_manifest(dir, "train", cfg.materialized, inputs, outputs, extra);
    throw BlowUpError(std::numeric_limits<double>::quiet_NaN(), "training stopped: " + *res.failure);
  }
  const FnoField model(std::make_shared<const FnoParams>(cfg.fno, res.params));
  const LossPair final_loss = evaluate_short_term(model, data, cfg.evaluate.horizon, sgd.dt_internal, opt.threads);
  extra["final_loss"] = {{"absolute", final_loss.absolute}, {"relative", final_loss.relative},
                         {"horizon", cfg.evaluate.horizon}};
  write_manifest(dir, "train", cfg.materialized, inputs, outputs, extra);
  *opt.log << "train: done, training-set relative error " << final_loss.relative << '\n';
}

// ------------------------------------------------------------ hybrid

void cmd_hybrid(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::vector<fs::path> inputs;
  const std::vector<Trajectory> data = at_resolution(load_split(opt.out / "data", "train", &inputs), cfg.train_resolution);
  const fs::path pre_path = opt.checkpoint.value_or(opt.out / "train" / "checkpoint.nd");
  if (!fs::exists(pre_path)) throw IoError("pretrained checkpoint '" + pre_path.string() + "' does not exist");
  const Checkpoint pre = read_checkpoint(pre_path);
  inputs.push_back(pre_path);
  if (pre.params.spec.dims != 1) throw InvalidArgument("hybrid: the kurtosis forward map needs a 1-D system");
  check_model_fits(pre.params, data, "hybrid");
  const fs::path dir = ensure_dir(opt.out / "hybrid");

  // Long-statistics window: the start of the first training trajectory.
  const Trajectory& first = data.front();
  std::size_t len = first.size();
  if (cfg.hybrid.t_long > 0.0) {
    len = 0;
    while (len < first.size() && first.times[len] - first.times[0] <= cfg.hybrid.t_long * (1.0 + 1e-12)) ++len;
  }
  if (len < 2) throw ConfigError("hybrid.t_long", "hybrid.t_long covers fewer than two snapshots");
  const Trajectory window = first.slice(0, len);
  const double y = uxx_kurtosis(window);
  const double gap = window.times[1] - window.times[0];

  KurtosisMapSpec ks;
  ks.spec = pre.params.spec;
  ks.u0 = window.states.front();
  ks.t_long = window.times.back() - window.times.front();
  ks.dt_obs = gap;
  ks.dt = gap / cfg.hybrid.substeps;
  ks.bound = cfg.hybrid.bound;
  ks.sentinel = blowup_sentinel(y, cfg.hybrid.noise_var);
  const KurtosisForwardMap fmap(ks);

  HybridConfig hc = cfg.hybrid.config;
  hc.sgd.dt_internal = internal_dt(data, cfg.hybrid.substeps);
  hc.sgd.threads = opt.threads;
  hc.eki.threads = opt.threads;
  if (hc.eki_every > hc.total_epochs) {
    *opt.log << "hybrid: eki_every (" << hc.eki_every << ") > total_epochs (" << hc.total_epochs
             << "): no EKI epoch will run, this is SGD-only training\n";
  }
  *opt.log << "hybrid: target kurtosis(u_xx) = " << y << " over " << ks.t_long << " time units\n";

  const HybridResult res =
      hybrid_train(fno_factory(pre.params.spec), pre.params.values, data, fmap, {y}, hc, [&](int eki_epoch, const HybridHistory& h) {
        if (h.eki.empty() || h.eki.back().eki_epoch != eki_epoch) {
          *opt.log << "hybrid: EKI epoch " << eki_epoch << " failed\n" << std::flush;
          return;
        }
        const EkiRecord& r = h.eki.back();
        *opt.log << "hybrid: epoch " << r.epoch << "/" << hc.total_epochs << ", EKI epoch " << eki_epoch
                 << ": short " << r.short_error << ", long " << r.long_error << '\n'
                 << std::flush;
      });
  for (const auto& f : res.history.failures) *opt.log << "hybrid: " << f << '\n';

  std::vector<fs::path> outputs;
  {
    CsvWriter csv(dir / "sgd_history.csv", {"epoch", "lr", "absolute", "relative"});
    for (const auto& r : res.history.sgd) csv.row({r.epoch}, {r.lr, r.absolute, r.relative});
    outputs.push_back(dir / "sgd_history.csv");
  }
  {
    CsvWriter csv(dir / "eki_history.csv", {"epoch", "eki_epoch", "iteration", "short_err", "long_err"});
    for (const auto& r : res.history.eki) csv.row({r.epoch, r.eki_epoch, r.iteration}, {r.short_error, r.long_error});
    outputs.push_back(dir / "eki_history.csv");
  }
  const int epochs_done = res.history.sgd.empty() ? 0 : res.history.sgd.back().epoch + 1;
  write_checkpoint(dir / "final.nd", {FnoParams{pre.params.spec, res.params}, epochs_done, std::nullopt});
  outputs.push_back(dir / "final.nd");

  json selection;
  ParamVector selected = res.params;
  if (res.history.eki.empty()) {
    selection = {{"source", "final"}, {"reason", "no EKI iterate recorded"}};
  } else {
    const std::size_t idx = select_checkpoint(res.history.eki, res.pretrained_short_error, hc.rho);
    const EkiRecord& r = res.history.eki[idx];
    selected = r.mean;
    selection = {{"source", "eki"},          {"index", idx},           {"epoch", r.epoch},
                 {"eki_epoch", r.eki_epoch}, {"iteration", r.iteration}, {"short_err", r.short_error},
                 {"long_err", r.long_error},  {"feasible", r.short_error <= hc.rho * res.pretrained_short_error}};
  }
  write_checkpoint(dir / "selected.nd", {FnoParams{pre.params.spec, selected}, epochs_done, std::nullopt});
  outputs.push_back(dir / "selected.nd");
  write_manifest(dir, "hybrid", cfg.materialized, inputs, outputs,
                 {{"seeds", {{"sgd", hc.sgd.seed}, {"eki", hc.eki.seed}}},
                  {"target", {{"statistic", fmap.statistic()}, {"y", y}, {"t_long", ks.t_long}}},
                  {"pretrained", {{"short_err", res.pretrained_short_error}, {"long_err", res.pretrained_long_error}}},
                  {"selection", selection},
                  {"failures", res.history.failures}});
  *opt.log << "hybrid: done, selected " << selection.value("source", "") << " checkpoint\n";
}

// ------------------------------------------------------------ evaluate

void cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& opt) {
  const fs::path model_path = opt.checkpoint.value_or(default_model(opt.out));
  if (!fs::exists(model_path)) throw IoError("checkpoint '" + model_path.string() + "' does not exist");
  const Checkpoint ckpt = read_checkpoint(model_path);
  std::vector<fs::path> inputs{model_path};
  const std::vector<Trajectory> stored = load_split(opt.out / "data", opt.split, &inputs);
  const fs::path dir = ensure_dir(opt.out / "evaluate");
  const auto params = std::make_shared<const FnoParams>(ckpt.params);
  const FnoField model(params);

  json metrics = {{"checkpoint", model_path.generic_string()}, {"split", opt.split}, {"horizon", cfg.evaluate.horizon}};
  std::vector<Trajectory> ref_data;
  double ref_dt = 0.0;
  for (const auto& [name, res] : {std::pair{"I", cfg.eval_resolution}, std::pair{"II", cfg.train_resolution}}) {
    std::vector<Trajectory> data = at_resolution(stored, res);
    check_model_fits(*params, data, std::string("evaluate (") + name + ")");
    const double dt = internal_dt(data, res.substeps);
    json block = resolution_json(res, data, dt);
    try {
      const LossPair e = evaluate_short_term(model, data, cfg.evaluate.horizon, dt, opt.threads);
      block["absolute"] = e.absolute;
      block["relative"] = e.relative;
    } catch (const BlowUpError& err) {
      block["blowup"] = err.what();
    }
    metrics["errors"][name] = block;
    if (ref_data.empty()) {
      ref_data = std::move(data);
      ref_dt = dt;
    }
  }

  std::vector<fs::path> outputs;
  std::vector<Trajectory> predicted;
  try {
    for (const auto& t : ref_data) predicted.push_back(predict(model, t, ref_dt, cfg.sgd.blowup_bound));
  } catch (const BlowUpError& err) {
    metrics["statistics"] = {{"skipped", std::string("model blew up: ") + err.what()}};
    predicted.clear();
  }
  if (!predicted.empty()) {
    const StatBundle truth = collect_stats(ref_data, cfg.evaluate.acf_max_lag, true);
    const StatBundle pred = collect_stats(predicted, cfg.evaluate.acf_max_lag, true);
    write_stat_csvs(dir, {"truth", "model"}, {&truth, &pred}, cfg.evaluate.pdf_bins, outputs);
    constexpr std::size_t kKlCap = 20000;
    auto kl = [&](const SampleCloud& p, const SampleCloud& q) {
      KlDiagnostics diag;
      const double v = kl_divergence_knn(thinned(p, kKlCap), thinned(q, kKlCap), cfg.evaluate.knn_k, &diag);
      return json{{"value", v}, {"jittered", diag.jittered}};
    };
    metrics["statistics"] = {
        {"kl_truth_model",
         {{"u", kl(truth.u, pred.u)}, {"u_x", kl(truth.ux, pred.ux)}, {"u_xx", kl(truth.uxx, pred.uxx)},
          {"joint", kl(truth.joint, pred.joint)}, {"k", cfg.evaluate.knn_k}}},
        {"kurtosis_u_xx", {{"truth", moments(truth.uxx.points).excess_kurtosis},
                           {"model", moments(pred.uxx.points).excess_kurtosis}}},
        {"acf_time_first_zero",
         {{"truth", first_zero_crossing(truth.acf_time)}, {"model", first_zero_crossing(pred.acf_time)}}},
        {"max_abs_model", [&] {
           double m = 0.0;
           for (const auto& t : predicted)
             for (const auto& s : t.states) m = std::max(m, s.max_abs());
           return m;
         }()}};
  }
  write_json(dir / "metrics.json", metrics);
  outputs.insert(outputs.begin(), dir / "metrics.json");
  write_manifest(dir, "evaluate", cfg.materialized, inputs, outputs);
  *opt.log << "evaluate: relative error (I) " << metrics["errors"]["I"].value("relative", NAN) << ", (II) "
           << metrics["errors"]["II"].value("relative", NAN) << '\n';
}

// ------------------------------------------------------------ stats

void cmd_stats(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::vector<fs::path> inputs;
  const std::vector<Trajectory> data = at_resolution(load_split(opt.out / "data", opt.split, &inputs), cfg.eval_resolution);
  const fs::path dir = ensure_dir(opt.out / "stats");
  const StatBundle b = collect_stats(data, cfg.evaluate.acf_max_lag);
  std::vector<fs::path> outputs;
  write_stat_csvs(dir, {opt.split}, {&b}, cfg.evaluate.pdf_bins, outputs);
  json summary = {{"split", opt.split},
                  {"moments", {{"u", moments_json(b.u)}, {"u_x", moments_json(b.ux)}, {"u_xx", moments_json(b.uxx)}}},
                  {"acf_time_first_zero", first_zero_crossing(b.acf_time)},
                  {"acf_space_first_zero", first_zero_crossing(b.acf_space)}};
  const double k_top = b.spectrum.k.empty() ? 0.0 : b.spectrum.k.back();
  if (k_top >= 100.0) summary["spectrum_slope_10_100"] = spectrum_slope(b.spectrum, 10.0, 100.0);
  write_json(dir / "summary.json", summary);
  outputs.insert(outputs.begin(), dir / "summary.json");
  write_manifest(dir, "stats", cfg.materialized, inputs, outputs);
  *opt.log << "stats: wrote " << outputs.size() << " files to " << dir.string() << '\n';
}

}  // namespace ndop::cli
