#include "cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "ndop/error.hpp"
#include "ndop/rng.hpp"

namespace ndop::cli {

namespace {

using nlohmann::json;

// Walks one JSON object, recording every value read (or defaulted) into
// `out` and rejecting keys nobody asked for.
class Section {
 public:
  Section(const json* node, std::string path, json* out) : node_(node), path_(std::move(path)), out_(out) {
    if (node_ && !node_->is_object()) throw ConfigError(path_, "config: '" + path_ + "' must be an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return node_ && node_->contains(key); }

  template <typename T>
  T get(const std::string& key, const T& fallback) {
    used_.insert(key);
    T value = has(key) ? convert<T>(key) : fallback;
    (*out_)[key] = value;
    return value;
  }

  template <typename T>
  T require(const std::string& key) {
    used_.insert(key);
    if (!has(key)) throw ConfigError(key_path(key), "config: missing required key '" + key_path(key) + "'");
    T value = convert<T>(key);
    (*out_)[key] = value;
    return value;
  }

  Section child(const std::string& key) {
    used_.insert(key);
    (*out_)[key] = json::object();
    return Section(has(key) ? &node_->at(key) : nullptr, key_path(key), &(*out_)[key]);
  }

  void fail(const std::string& key, const std::string& why) const {
    throw ConfigError(key_path(key), "config: '" + key_path(key) + "' " + why);
  }

  // Throws for keys present in the file but never read.
  void finish() const {
    if (!node_) return;
    for (const auto& item : node_->items()) {
      if (!used_.count(item.key())) {
        throw ConfigError(key_path(item.key()), "config: unknown key '" + key_path(item.key()) + "'");
      }
    }
  }

 private:
  template <typename T>
  T convert(const std::string& key) const {
    try {
      return node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(key_path(key), "config: '" + key_path(key) + "' has the wrong type (" + e.what() + ")");
    }
  }

  const json* node_;
  std::string path_;
  json* out_;
  std::set<std::string> used_;
};

void positive(Section& s, const std::string& key, double v) {
  if (!(v > 0.0)) s.fail(key, "must be positive");
}

void at_least(Section& s, const std::string& key, long long v, long long lo) {
  if (v < lo) s.fail(key, "must be >= " + std::to_string(lo));
}

Resolution read_resolution(Section s, const Resolution& fallback, int stored_n, const std::string& stored_note) {
  Resolution r;
  r.space_stride = s.get("space_stride", fallback.space_stride);
  r.time_stride = s.get("time_stride", fallback.time_stride);
  r.substeps = s.get("substeps", fallback.substeps);
  at_least(s, "space_stride", r.space_stride, 1);
  at_least(s, "time_stride", r.time_stride, 1);
  at_least(s, "substeps", r.substeps, 1);
  if (stored_n % r.space_stride != 0 || (stored_n / r.space_stride) % 2 != 0 || stored_n / r.space_stride < 4) {
    s.fail("space_stride", "must leave an even grid of at least 4 points (" + stored_note + ")");
  }
  s.finish();
  return r;
}

GradientMode gradient_mode_from(Section& s, const std::string& name) {
  if (name == "recompute") return GradientMode::kRecomputeStages;
  if (name == "store") return GradientMode::kStoreStages;
  if (name == "checkpointed") return GradientMode::kCheckpointed;
  s.fail("gradient_mode", "must be one of recompute, store, checkpointed");
  return GradientMode::kRecomputeStages;
}

LrSchedule schedule_from(Section& s, const std::string& name) {
  if (name == "cosine") return LrSchedule::kCosine;
  if (name == "constant") return LrSchedule::kConstant;
  s.fail("schedule", "must be cosine or constant");
  return LrSchedule::kCosine;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig cfg;
  json& out = cfg.materialized;
  out = json::object();
  Section root(&doc, "", &out);

  cfg.out_dir = root.get<std::string>("out_dir", "out");

  // ---- system and grid
  Section sys = root.child("system");
  const std::string kind_name = sys.require<std::string>("kind");
  try {
    cfg.data.system.kind = system_from_string(kind_name);
  } catch (const InvalidArgument&) {
    sys.fail("kind", "must be burgers, kse or nse");
  }
  const SystemKind kind = cfg.data.system.kind;
  const int dims = kind == SystemKind::kNse ? 2 : 1;
  std::vector<int> n;
  if (sys.has("n") && doc.at("system").at("n").is_number_integer()) {
    n = {sys.require<int>("n")};
  } else {
    n = sys.require<std::vector<int>>("n");
  }
  if (static_cast<int>(n.size()) != dims) sys.fail("n", "needs " + std::to_string(dims) + " entries");
  const std::vector<double> default_extent =
      kind == SystemKind::kKse ? std::vector<double>{22.0} : std::vector<double>(static_cast<std::size_t>(dims), 1.0);
  const auto extent = sys.get("extent", default_extent);
  if (extent.size() != n.size()) sys.fail("extent", "needs one entry per axis");
  try {
    cfg.data.grid = dims == 1 ? Grid::line(n[0], extent[0]) : Grid::plane(n[0], n[1], extent[0], extent[1]);
  } catch (const InvalidArgument& e) {
    sys.fail("n", std::string("does not form a valid grid: ") + e.what());
  }
  if (kind != SystemKind::kKse) {
    cfg.data.system.nu = sys.get("nu", 1e-3);
    positive(sys, "nu", cfg.data.system.nu);
  }
  if (kind == SystemKind::kNse) {
    const auto forcing = sys.get<std::string>("forcing", "default");
    if (forcing == "default") {
      cfg.data.system.forcing = nse_default_forcing(cfg.data.grid);
    } else if (forcing != "none") {
      sys.fail("forcing", "must be default or none");
    }
  }
  sys.finish();

  // ---- truth data
  Section data = root.child("data");
  cfg.data.dt_solver = data.require<double>("dt_solver");
  cfg.data.dt_obs = data.require<double>("dt_obs");
  cfg.data.t_final = data.require<double>("t_final");
  positive(data, "dt_solver", cfg.data.dt_solver);
  positive(data, "dt_obs", cfg.data.dt_obs);
  positive(data, "t_final", cfg.data.t_final);
  if (kind == SystemKind::kKse) {
    cfg.data.train_fraction = data.get("train_fraction", 0.8);
    if (!(cfg.data.train_fraction > 0.0 && cfg.data.train_fraction < 1.0)) {
      data.fail("train_fraction", "must lie in (0, 1)");
    }
  } else {
    cfg.data.n_train = data.get("n_train", 10);
    cfg.data.n_test = data.get("n_test", 2);
    at_least(data, "n_train", cfg.data.n_train, 1);
    at_least(data, "n_test", cfg.data.n_test, 0);
    Section grf = data.child("grf");
    const bool nse = kind == SystemKind::kNse;
    cfg.data.grf_sigma2 = grf.get("sigma2", nse ? std::pow(7.0, 1.5) : 625.0);
    cfg.data.grf_tau = grf.get("tau", nse ? 7.0 : 5.0);
    cfg.data.grf_alpha = grf.get("alpha", nse ? 2.5 : 2.0);
    positive(grf, "sigma2", cfg.data.grf_sigma2);
    positive(grf, "tau", cfg.data.grf_tau);
    positive(grf, "alpha", cfg.data.grf_alpha);
    grf.finish();
  }
  cfg.data.spinup = data.get("spinup", 0.0);
  if (cfg.data.spinup < 0.0) data.fail("spinup", "must be >= 0");
  cfg.data.space_stride = data.get("space_stride", 1);
  at_least(data, "space_stride", cfg.data.space_stride, 1);
  for (int d = 0; d < dims; ++d) {
    const int m = n[static_cast<std::size_t>(d)];
    if (m % cfg.data.space_stride != 0 || (m / cfg.data.space_stride) % 2 != 0 || m / cfg.data.space_stride < 4) {
      data.fail("space_stride", "must divide system.n into an even grid of at least 4 points");
    }
  }
  cfg.data_seed = data.get<std::uint64_t>("seed", 0);
  data.finish();
  const int stored_n = n[0] / cfg.data.space_stride;
  if (dims == 2 && n[1] != n[0]) sys.fail("n", "2-D grids must be square");

  cfg.train_resolution = read_resolution(root.child("train_resolution"), Resolution{}, stored_n, "stored grid");
  cfg.eval_resolution = read_resolution(root.child("eval_resolution"), Resolution{}, stored_n, "stored grid");

  // ---- model
  Section fno = root.child("fno");
  cfg.fno.dims = dims;
  cfg.fno.width = fno.get("width", 64);
  const int k_default = dims == 1 ? 24 : 12;
  std::vector<int> k_max;
  if (fno.has("k_max") && doc.at("fno").at("k_max").is_number_integer()) {
    k_max = std::vector<int>(static_cast<std::size_t>(dims), fno.require<int>("k_max"));
    out["fno"]["k_max"] = k_max;
  } else {
    k_max = fno.get("k_max", std::vector<int>(static_cast<std::size_t>(dims), k_default));
  }
  if (static_cast<int>(k_max.size()) != dims) fno.fail("k_max", "needs one entry per axis");
  cfg.fno.k_max = {k_max[0], dims == 2 ? k_max[1] : k_max[0]};
  cfg.fno.n_layers = fno.get("n_layers", 4);
  try {
    cfg.fno.activation = activation_from_string(fno.get<std::string>("activation", "gelu"));
  } catch (const InvalidArgument&) {
    fno.fail("activation", "must be gelu, tanh, relu or identity");
  }
  cfg.fno.append_coordinates = fno.get("append_coordinates", true);
  cfg.fno.projection_width = fno.get("projection_width", 128);
  cfg.init_seed = fno.get<std::uint64_t>("init_seed", 0);
  try {
    cfg.fno.validate();
  } catch (const InvalidArgument& e) {
    fno.fail("width", std::string("describes an invalid network: ") + e.what());
  }
  fno.finish();

  // ---- short-term training
  Section train = root.child("train");
  cfg.sgd.epochs = train.get("epochs", 1000);
  cfg.sgd.batch = train.get("batch", 10);
  cfg.sgd.lr0 = train.get("lr0", 1e-3);
  cfg.sgd.schedule = schedule_from(train, train.get<std::string>("schedule", "cosine"));
  cfg.sgd.horizon = train.get("horizon", 0.0);
  cfg.sgd.gradient_mode = gradient_mode_from(train, train.get<std::string>("gradient_mode", "recompute"));
  cfg.sgd.blowup_bound = train.get("blowup_bound", 1e6);
  cfg.sgd.seed = train.get<std::uint64_t>("seed", 0);
  cfg.checkpoint_every = train.get("checkpoint_every", 0);
  at_least(train, "epochs", cfg.sgd.epochs, 0);
  at_least(train, "batch", cfg.sgd.batch, 1);
  positive(train, "lr0", cfg.sgd.lr0);
  if (cfg.sgd.horizon < 0.0) train.fail("horizon", "must be >= 0");
  positive(train, "blowup_bound", cfg.sgd.blowup_bound);
  at_least(train, "checkpoint_every", cfg.checkpoint_every, 0);
  train.finish();

  // ---- hybrid
  Section hyb = root.child("hybrid");
  HybridConfig& hc = cfg.hybrid.config;
  hc.total_epochs = hyb.get("total_epochs", hc.total_epochs);
  hc.eki_every = hyb.get("eki_every", hc.eki_every);
  hc.sgd = cfg.sgd;
  hc.sgd.schedule = LrSchedule::kConstant;
  hc.sgd.lr0 = hyb.get("lr", 1e-4);
  hc.sgd.batch = hyb.get("batch", 2);
  hc.sgd.horizon = hyb.get("horizon", cfg.sgd.horizon);
  hc.sgd.seed = hyb.get<std::uint64_t>("seed", 0);
  hc.short_eval_windows = hyb.get("short_eval_windows", hc.short_eval_windows);
  hc.rho = hyb.get("rho", hc.rho);
  cfg.hybrid.substeps = hyb.get("substeps", cfg.train_resolution.substeps);
  cfg.hybrid.t_long = hyb.get("t_long", 0.0);
  cfg.hybrid.noise_var = hyb.get("noise_var", 0.01);
  cfg.hybrid.bound = hyb.get("bound", 1e3);
  at_least(hyb, "total_epochs", hc.total_epochs, 1);
  at_least(hyb, "eki_every", hc.eki_every, 1);
  positive(hyb, "lr", hc.sgd.lr0);
  at_least(hyb, "batch", hc.sgd.batch, 1);
  at_least(hyb, "short_eval_windows", hc.short_eval_windows, 1);
  positive(hyb, "rho", hc.rho);
  at_least(hyb, "substeps", cfg.hybrid.substeps, 1);
  if (cfg.hybrid.t_long < 0.0) hyb.fail("t_long", "must be >= 0");
  positive(hyb, "noise_var", cfg.hybrid.noise_var);
  positive(hyb, "bound", cfg.hybrid.bound);
  {
    Section eki = hyb.child("eki");
    hc.eki.ensemble_size = eki.get("ensemble_size", hc.eki.ensemble_size);
    hc.eki.iterations = eki.get("iterations", hc.eki.iterations);
    hc.eki.spread = eki.get("spread", hc.eki.spread);
    hc.eki.seed = eki.get<std::uint64_t>("seed", 0);
    at_least(eki, "ensemble_size", hc.eki.ensemble_size, 2);
    at_least(eki, "iterations", hc.eki.iterations, 1);
    if (!(hc.eki.spread >= 0.0)) eki.fail("spread", "must be >= 0");
    eki.finish();
  }
  hc.eki.noise_cov = {cfg.hybrid.noise_var};
  hyb.finish();

  // ---- evaluation
  Section ev = root.child("evaluate");
  cfg.evaluate.horizon = ev.get("horizon", 0.0);
  cfg.evaluate.knn_k = ev.get("knn_k", 1);
  cfg.evaluate.pdf_bins = ev.get("pdf_bins", 60);
  cfg.evaluate.acf_max_lag = ev.get("acf_max_lag", 50);
  if (cfg.evaluate.horizon < 0.0) ev.fail("horizon", "must be >= 0");
  at_least(ev, "knn_k", cfg.evaluate.knn_k, 1);
  at_least(ev, "pdf_bins", cfg.evaluate.pdf_bins, 1);
  at_least(ev, "acf_max_lag", cfg.evaluate.acf_max_lag, 1);
  ev.finish();

  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

void override_seeds(ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.data_seed = mix_seed(seed, 1);
  cfg.init_seed = mix_seed(seed, 2);
  cfg.sgd.seed = mix_seed(seed, 3);
  cfg.hybrid.config.sgd.seed = mix_seed(seed, 4);
  cfg.hybrid.config.eki.seed = mix_seed(seed, 5);
  json& m = cfg.materialized;
  m["data"]["seed"] = cfg.data_seed;
  m["fno"]["init_seed"] = cfg.init_seed;
  m["train"]["seed"] = cfg.sgd.seed;
  m["hybrid"]["seed"] = cfg.hybrid.config.sgd.seed;
  m["hybrid"]["eki"]["seed"] = cfg.hybrid.config.eki.seed;
}

}  // namespace ndop::cli
