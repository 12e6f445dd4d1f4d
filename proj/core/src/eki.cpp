#include "ndop/eki.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "ndop/error.hpp"
#include "ndop/odeint.hpp"
#include "ndop/parallel.hpp"
#include "ndop/stats.hpp"

namespace ndop {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd covariance_matrix(const std::vector<double>& cov, std::size_t d) {
  MatrixXd m = MatrixXd::Zero(static_cast<long>(d), static_cast<long>(d));
  if (cov.size() == d) {
    for (std::size_t i = 0; i < d; ++i) m(static_cast<long>(i), static_cast<long>(i)) = cov[i];
  } else if (cov.size() == d * d) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) m(static_cast<long>(i), static_cast<long>(j)) = cov[i * d + j];
    }
  } else {
    throw ShapeError("EKI: noise covariance needs d or d*d entries");
  }
  return m;
}

std::vector<double> full_covariance(const std::vector<double>& cov, std::size_t d) {
  const MatrixXd m = covariance_matrix(cov, d);
  std::vector<double> out(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = m(static_cast<long>(i), static_cast<long>(j));
  }
  return out;
}

}  // namespace

void EkiConfig::validate(std::size_t d) const {
  if (ensemble_size < 2) throw InvalidArgument("EKI: ensemble size J must be >= 2");
  if (iterations < 0) throw InvalidArgument("EKI: iterations must be >= 0");
  if (!(spread >= 0.0)) throw InvalidArgument("EKI: spread must be >= 0");
  const MatrixXd s = covariance_matrix(noise_cov, d);
  if (!s.isApprox(s.transpose())) throw InvalidArgument("EKI: noise covariance must be symmetric");
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw InvalidArgument("EKI: noise covariance must be positive definite");
}

double eki_misfit(const Observation& y, const Observation& g, const std::vector<double>& noise_cov) {
  const std::size_t d = y.size();
  if (g.size() != d) throw ShapeError("eki_misfit: dimension mismatch");
  const MatrixXd s = covariance_matrix(noise_cov, d);
  const VectorXd r = Eigen::Map<const VectorXd>(y.data(), static_cast<long>(d)) -
                     Eigen::Map<const VectorXd>(g.data(), static_cast<long>(d));
  return r.dot(s.llt().solve(r));
}

EkiEnsemble eki_update(const EkiEnsemble& ens, const std::vector<Observation>& g, Rng& rng) {
  const std::size_t J = ens.members.size();
  if (J < 2) throw InvalidArgument("eki_update: ensemble needs J >= 2");
  if (g.size() != J) throw ShapeError("eki_update: one observation per member required");
  const std::size_t d = ens.y.size();
  const std::size_t p = ens.members.front().size();
  for (const auto& m : ens.members) {
    if (m.size() != p) throw ShapeError("eki_update: members differ in length");
  }
  for (const auto& gj : g) {
    if (gj.size() != d) throw ShapeError("eki_update: observation dimension mismatch");
    for (double v : gj) {
      if (!std::isfinite(v)) throw NumericError("eki_update: non-finite forward-map value");
    }
  }
  const MatrixXd noise = covariance_matrix(ens.noise_cov, d);

  const long P = static_cast<long>(p), D = static_cast<long>(d), JJ = static_cast<long>(J);
  MatrixXd theta(P, JJ), gm(D, JJ);
  for (long j = 0; j < JJ; ++j) {
    theta.col(j) = Eigen::Map<const VectorXd>(ens.members[static_cast<std::size_t>(j)].data(), P);
    gm.col(j) = Eigen::Map<const VectorXd>(g[static_cast<std::size_t>(j)].data(), D);
  }
  const VectorXd theta_bar = theta.rowwise().mean();
  const VectorXd g_bar = gm.rowwise().mean();
  const MatrixXd dtheta = theta.colwise() - theta_bar;
  const MatrixXd dg = gm.colwise() - g_bar;
  const double norm = 1.0 / static_cast<double>(J - 1);
  const MatrixXd c_tg = norm * dtheta * dg.transpose();  // p x d
  const MatrixXd c_gg = norm * dg * dg.transpose();       // d x d

  const Eigen::LLT<MatrixXd> llt(c_gg + noise);
  if (llt.info() != Eigen::Success) throw NumericError("eki_update: C_gg + Sigma_eta is not positive definite");
  const Eigen::LLT<MatrixXd> noise_llt(noise);
  const MatrixXd noise_l = noise_llt.matrixL();

  // Perturbed observations, member by member.
  MatrixXd innovation(D, JJ);
  const VectorXd y = Eigen::Map<const VectorXd>(ens.y.data(), D);
  for (long j = 0; j < JJ; ++j) {
    VectorXd xi(D);
    for (long i = 0; i < D; ++i) xi(i) = rng.normal();
    innovation.col(j) = y + noise_l * xi - gm.col(j);
  }
  const MatrixXd update = c_tg * llt.solve(innovation);  // p x J

  EkiEnsemble out = ens;
  for (long j = 0; j < JJ; ++j) {
    auto& m = out.members[static_cast<std::size_t>(j)];
    for (long i = 0; i < P; ++i) m[static_cast<std::size_t>(i)] += update(i, j);
  }
  for (const auto& m : out.members) {
    for (double v : m) {
      if (!std::isfinite(v)) throw NumericError("eki_update: update produced a non-finite member");
    }
  }
  return out;
}

EkiRun run_eki(const ForwardMap& fmap, const ParamVector& center, const Observation& y, const EkiConfig& cfg,
               const EkiRunOptions& options) {
  const std::size_t d = fmap.dim();
  if (y.size() != d) throw ShapeError("run_eki: target dimension does not match the forward map");
  cfg.validate(d);
  const Rng root(cfg.seed);
  Rng init = root.split(0);

  EkiEnsemble ens;
  ens.y = y;
  ens.noise_cov = full_covariance(cfg.noise_cov, d);
  ens.members.assign(static_cast<std::size_t>(cfg.ensemble_size), center);
  for (auto& m : ens.members) {
    for (double& v : m) v += cfg.spread * init.normal();
  }

  auto mean_of = [](const std::vector<ParamVector>& members) {
    ParamVector mean(members.front().size(), 0.0);
    for (const auto& m : members) {
      for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += m[i];
    }
    for (double& v : mean) v /= static_cast<double>(members.size());
    return mean;
  };
  auto record = [&](int it, const std::vector<Observation>* g) {
    EkiIterate r;
    r.iteration = it;
    r.mean = mean_of(ens.members);
    r.g_of_mean = fmap.evaluate(r.mean);
    double se = 0.0;
    for (std::size_t i = 0; i < d; ++i) se += (r.g_of_mean[i] - y[i]) * (r.g_of_mean[i] - y[i]);
    r.long_error = se / static_cast<double>(d);
    if (g) {
      Observation g_bar(d, 0.0);
      for (const auto& gj : *g) {
        for (std::size_t i = 0; i < d; ++i) g_bar[i] += gj[i] / static_cast<double>(g->size());
      }
      r.misfit = eki_misfit(y, g_bar, ens.noise_cov);
    } else {
      r.misfit = eki_misfit(y, r.g_of_mean, ens.noise_cov);
    }
    if (options.short_error) r.short_error = options.short_error(r.mean);
    return r;
  };

  EkiRun run;
  for (int it = 0;; ++it) {
    if (it == cfg.iterations) {
      run.iterates.push_back(record(it, nullptr));
      break;
    }
    std::vector<Observation> g(ens.members.size());
    parallel_for(ens.members.size(), cfg.threads, [&](std::size_t j) { g[j] = fmap.evaluate(ens.members[j]); });
    run.iterates.push_back(record(it, &g));
    Rng noise = root.split(static_cast<std::uint64_t>(it) + 1);
    ens = eki_update(ens, g, noise);
  }
  run.final_members = std::move(ens.members);
  return run;
}

// ---------------------------------------------------------------- kurtosis map

double uxx_kurtosis(const Trajectory& trajectory) {
  const SampleCloud s = derivative_samples(trajectory, 2);
  return moments(s.points).excess_kurtosis;
}

double blowup_sentinel(double y, double noise_var) { return y + 1e3 * std::sqrt(noise_var); }

KurtosisForwardMap::KurtosisForwardMap(KurtosisMapSpec spec) : spec_(std::move(spec)) {
  if (!(spec_.t_long > 0.0) || !(spec_.dt_obs > 0.0) || !(spec_.dt > 0.0)) {
    throw InvalidArgument("kurtosis forward map: t_long, dt_obs and dt must be positive");
  }
  if (spec_.u0.grid().dims() != 1) throw InvalidArgument("kurtosis forward map: 1-D state expected");
}

Trajectory KurtosisForwardMap::simulate(const ParamVector& theta) const {
  const FnoField f(std::make_shared<const FnoParams>(params_unflatten(spec_.spec, theta)));
  const auto count = static_cast<std::size_t>(std::llround(spec_.t_long / spec_.dt_obs)) + 1;
  return integrate(f, spec_.u0, IntegrationPlan::uniform(0.0, spec_.dt_obs, count, spec_.dt), spec_.bound);
}

Observation KurtosisForwardMap::evaluate(const ParamVector& theta) const {
  try {
    return {uxx_kurtosis(simulate(theta))};
  } catch (const BlowUpError&) {
    return {spec_.sentinel};
  } catch (const NumericError&) {
    return {spec_.sentinel};
  }
}

}  // namespace ndop
