#include "sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>

#include "errors.hpp"
#include "msm.hpp"
#include "rng.hpp"

namespace ctmsm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Target split into blocks; evaluate() scores a candidate that differs from
// the current state only within one block and keeps the pieces it computed
// until accept() or the next evaluate().
class BlockModel {
 public:
  virtual ~BlockModel() = default;
  virtual double current() const = 0;
  virtual double evaluate(std::size_t block, const Eigen::VectorXd& x) = 0;
  virtual void accept(std::size_t block, const Eigen::VectorXd& x) = 0;
  virtual double lower_bound(int /*coord*/) const { return kNegInf; }
};

double safe(double v) { return std::isfinite(v) ? v : kNegInf; }

class ThetaModel : public BlockModel {
 public:
  ThetaModel(std::span<const SubjectHistory> data, const ThetaLayout& layout, const Priors& priors,
             const Eigen::VectorXd& x0)
      : data_(data), layout_(layout), priors_(priors), msm_(data), n_(data.size()) {
    rate_.resize(n_);
    mark_.resize(n_);
    y_.resize(n_);
    tmax_.resize(n_);
    l_.resize(n_);
    const auto th = layout_.unpack(x0);
    prior_ = log_prior_theta(layout_, x0, priors_);
    require(prior_ > kNegInf, ErrorKind::Config, "sampler start lies outside the prior support");
    for (std::size_t i = 0; i < n_; ++i) {
      rate_[i] = log_lik_A_rate_pair(data_[i], th);
      mark_[i] = log_lik_A_mark_pair(data_[i], th);
      y_[i] = log_lik_Y_pair(data_[i], th, msm_.exposure(i, th.outcome.kernel));
      tmax_[i] = log_lik_Tmax(data_[i], th);
      l_[i] = log_lik_L(data_[i], th);
    }
    lp_u_ = {std::log1p(-th.confounder_prob), std::log(th.confounder_prob)};
    sum_tmax_ = std::accumulate(tmax_.begin(), tmax_.end(), 0.0);
    sum_l_ = std::accumulate(l_.begin(), l_.end(), 0.0);
    mixture_ = mixture(rate_, mark_, y_, lp_u_);
    current_ = safe(mixture_ + sum_tmax_ + sum_l_ + prior_);
    require(current_ > kNegInf, ErrorKind::Evaluation, "log posterior is not finite at the sampler start");
  }

  double current() const override { return current_; }

  double lower_bound(int coord) const override {
    return coord == layout_.index("c_kernel") ? 0.0 : kNegInf;
  }

  double evaluate(std::size_t block, const Eigen::VectorXd& x) override {
    cand_prior_ = log_prior_theta(layout_, x, priors_);
    if (cand_prior_ == kNegInf) return kNegInf;
    const auto th = layout_.unpack(x);
    double mix = mixture_, tm = sum_tmax_, ll = sum_l_;
    switch (static_cast<ThetaBlock>(block)) {
      case ThetaBlock::A1:
        cand_pairs_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) cand_pairs_[i] = log_lik_A_rate_pair(data_[i], th);
        mix = mixture(cand_pairs_, mark_, y_, lp_u_);
        break;
      case ThetaBlock::A2:
        cand_pairs_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) cand_pairs_[i] = log_lik_A_mark_pair(data_[i], th);
        mix = mixture(rate_, cand_pairs_, y_, lp_u_);
        break;
      case ThetaBlock::Y:
        cand_pairs_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
          cand_pairs_[i] = log_lik_Y_pair(data_[i], th, msm_.exposure(i, th.outcome.kernel));
        }
        mix = mixture(rate_, mark_, cand_pairs_, lp_u_);
        break;
      case ThetaBlock::U:
        cand_lp_u_ = {std::log1p(-th.confounder_prob), std::log(th.confounder_prob)};
        mix = mixture(rate_, mark_, y_, cand_lp_u_);
        break;
      case ThetaBlock::Tmax:
        cand_scalar_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) cand_scalar_[i] = log_lik_Tmax(data_[i], th);
        tm = std::accumulate(cand_scalar_.begin(), cand_scalar_.end(), 0.0);
        break;
      case ThetaBlock::L:
        cand_scalar_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) cand_scalar_[i] = log_lik_L(data_[i], th);
        ll = std::accumulate(cand_scalar_.begin(), cand_scalar_.end(), 0.0);
        break;
    }
    cand_mix_ = mix;
    cand_tmax_ = tm;
    cand_l_ = ll;
    cand_value_ = safe(mix + tm + ll + cand_prior_);
    return cand_value_;
  }

  void accept(std::size_t block, const Eigen::VectorXd&) override {
    switch (static_cast<ThetaBlock>(block)) {
      case ThetaBlock::A1: rate_.swap(cand_pairs_); break;
      case ThetaBlock::A2: mark_.swap(cand_pairs_); break;
      case ThetaBlock::Y: y_.swap(cand_pairs_); break;
      case ThetaBlock::U: lp_u_ = cand_lp_u_; break;
      case ThetaBlock::Tmax: tmax_.swap(cand_scalar_); break;
      case ThetaBlock::L: l_.swap(cand_scalar_); break;
    }
    mixture_ = cand_mix_;
    sum_tmax_ = cand_tmax_;
    sum_l_ = cand_l_;
    prior_ = cand_prior_;
    current_ = cand_value_;
  }

 private:
  using Pairs = std::vector<std::array<double, 2>>;

  double mixture(const Pairs& r, const Pairs& m, const Pairs& y, const std::array<double, 2>& lp) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      s += log_sum_exp(r[i][0] + m[i][0] + y[i][0] + lp[0], r[i][1] + m[i][1] + y[i][1] + lp[1]);
    }
    return s;
  }

  std::span<const SubjectHistory> data_;
  const ThetaLayout& layout_;
  const Priors& priors_;
  MsmData msm_;
  std::size_t n_;
  Pairs rate_, mark_, y_, cand_pairs_;
  std::vector<double> tmax_, l_, cand_scalar_;
  std::array<double, 2> lp_u_{}, cand_lp_u_{};
  double mixture_ = 0, sum_tmax_ = 0, sum_l_ = 0, prior_ = 0, current_ = 0;
  double cand_mix_ = 0, cand_tmax_ = 0, cand_l_ = 0, cand_prior_ = 0, cand_value_ = 0;
};

class AlphaModel : public BlockModel {
 public:
  AlphaModel(std::span<const SubjectHistory> data, const AlphaLayout& layout, const Priors& priors,
             const Eigen::VectorXd& x0)
      : layout_(layout),
        priors_(priors),
        rate_design_(rate_design_exp(data, {})),
        term_design_(termination_design_exp(data, {})) {
    for (const auto& h : data) {
      for (const auto& j : h.jumps) jumps_.push_back({j.dose_before, j.dose_after});
    }
    parts_ = {rate_part(x0), mark_part(x0), term_part(x0)};
    prior_ = log_prior_alpha(layout_, x0, priors_);
    current_ = safe(parts_[0] + parts_[1] + parts_[2] + prior_);
    require(current_ > kNegInf, ErrorKind::Evaluation, "experimental log likelihood is not finite at the start");
  }

  double current() const override { return current_; }

  double evaluate(std::size_t block, const Eigen::VectorXd& x) override {
    cand_prior_ = log_prior_alpha(layout_, x, priors_);
    if (cand_prior_ == kNegInf) return kNegInf;
    cand_parts_ = parts_;
    switch (static_cast<AlphaBlock>(block)) {
      case AlphaBlock::A1: cand_parts_[0] = rate_part(x); break;
      case AlphaBlock::A2: cand_parts_[1] = mark_part(x); break;
      case AlphaBlock::Tmax: cand_parts_[2] = term_part(x); break;
    }
    cand_value_ = safe(cand_parts_[0] + cand_parts_[1] + cand_parts_[2] + cand_prior_);
    return cand_value_;
  }

  void accept(std::size_t, const Eigen::VectorXd&) override {
    parts_ = cand_parts_;
    prior_ = cand_prior_;
    current_ = cand_value_;
  }

 private:
  double rate_part(const Eigen::VectorXd& x) const {
    Eigen::VectorXd p(2);
    p << x[0], x[1];
    return process_loglik(rate_design_, p, nullptr);
  }
  double term_part(const Eigen::VectorXd& x) const {
    Eigen::VectorXd p(3);
    p << x[5], x[7], x[6];  // (intercept, dose, slope)
    return process_loglik(term_design_, p, nullptr);
  }
  double mark_part(const Eigen::VectorXd& x) const {
    const double sigma = std::exp(x[4]);
    double s = 0.0;
    for (const auto& [before, after] : jumps_) s += log_normal_density(after, x[2] + x[3] * before, sigma);
    return s;
  }

  const AlphaLayout& layout_;
  const Priors& priors_;
  ProcessDesign rate_design_, term_design_;
  std::vector<std::pair<double, double>> jumps_;
  std::array<double, 3> parts_{}, cand_parts_{};
  double prior_ = 0, current_ = 0, cand_prior_ = 0, cand_value_ = 0;
};

struct EngineBlock {
  std::string name;
  std::size_t model_block = 0;
  std::vector<int> idx;  // free coordinates
  Eigen::MatrixXd chol;  // proposal Cholesky factor (before scale)
  double scale = 1.0;
  int window_accepted = 0, window_proposed = 0;
  int burn_accepted = 0, burn_proposed = 0;
  int post_accepted = 0, post_proposed = 0;
  std::vector<Eigen::VectorXd> history;  // burn-in states for covariance adaptation
};

Eigen::MatrixXd initial_cholesky(BlockModel& model, const EngineBlock& b, const Eigen::VectorXd& x) {
  const auto d = static_cast<Eigen::Index>(b.idx.size());
  Eigen::VectorXd center = x;
  Eigen::VectorXd steps(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const int c = b.idx[static_cast<std::size_t>(k)];
    steps[k] = 1e-4 * std::max(1.0, std::abs(x[c]));
    const double lb = model.lower_bound(c);
    if (center[c] < lb + 2.0 * steps[k]) center[c] = lb + 2.0 * steps[k];
  }
  auto f = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd full = center;
    for (Eigen::Index k = 0; k < d; ++k) full[b.idx[static_cast<std::size_t>(k)]] = v[k];
    return model.evaluate(b.model_block, full);
  };
  Eigen::VectorXd v(d);
  for (Eigen::Index k = 0; k < d; ++k) v[k] = center[b.idx[static_cast<std::size_t>(k)]];
  const Eigen::MatrixXd neg_h = -hessian_from_values(f, v, steps);
  Eigen::MatrixXd cov;
  if (neg_h.allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg_h);
    Eigen::VectorXd ev = es.eigenvalues();
    const double top = std::max(ev.maxCoeff(), 1e-8);
    for (Eigen::Index k = 0; k < d; ++k) ev[k] = std::max(ev[k], 1e-6 * top);
    cov = es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  } else {
    cov = Eigen::MatrixXd::Identity(d, d) * 1e-4;
  }
  cov *= 2.38 * 2.38 / static_cast<double>(d);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return Eigen::MatrixXd::Identity(d, d) * 1e-2;
  return llt.matrixL();
}

void update_from_history(EngineBlock& b) {
  const auto d = static_cast<Eigen::Index>(b.idx.size());
  const std::size_t m = b.history.size();
  if (m < static_cast<std::size_t>(2 * d + 20)) return;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  for (const auto& h : b.history) mean += h;
  mean /= static_cast<double>(m);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  for (const auto& h : b.history) cov += (h - mean) * (h - mean).transpose();
  cov /= static_cast<double>(m - 1);
  const double tr = cov.trace() / static_cast<double>(d);
  if (!(tr > 0.0)) return;
  cov += Eigen::MatrixXd::Identity(d, d) * (1e-10 * tr);
  cov *= 2.38 * 2.38 / static_cast<double>(d);
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) return;
  b.chol = llt.matrixL();
  b.scale = 1.0;
}

struct Chain {
  BlockModel* model;
  Eigen::VectorXd x;
  std::vector<EngineBlock> blocks;
  RngStream rng;
};

void step_block(Chain& ch, EngineBlock& b, bool burnin) {
  const auto d = static_cast<Eigen::Index>(b.idx.size());
  Eigen::VectorXd xi(d);
  for (Eigen::Index k = 0; k < d; ++k) xi[k] = ch.rng.normal();
  const Eigen::VectorXd delta = b.scale * (b.chol * xi);
  Eigen::VectorXd cand = ch.x;
  for (Eigen::Index k = 0; k < d; ++k) cand[b.idx[static_cast<std::size_t>(k)]] += delta[k];
  const double lp = ch.model->evaluate(b.model_block, cand);
  const double log_u = std::log(ch.rng.uniform());
  const bool ok = lp > kNegInf && log_u < lp - ch.model->current();
  if (ok) {
    ch.model->accept(b.model_block, cand);
    ch.x = cand;
  }
  if (burnin) {
    ++b.window_proposed;
    ++b.burn_proposed;
    if (ok) {
      ++b.window_accepted;
      ++b.burn_accepted;
    }
  } else {
    ++b.post_proposed;
    if (ok) ++b.post_accepted;
  }
}

void adapt(Chain& ch, int it, const SamplerConfig& cfg) {
  const bool window_end = (it + 1) % cfg.adapt_window == 0;
  for (auto& b : ch.blocks) {
    if (cfg.adapt_covariance && it >= cfg.n_burnin / 4) {
      Eigen::VectorXd v(static_cast<Eigen::Index>(b.idx.size()));
      for (std::size_t k = 0; k < b.idx.size(); ++k) v[static_cast<Eigen::Index>(k)] = ch.x[b.idx[k]];
      b.history.push_back(std::move(v));
    }
    if (cfg.adapt_covariance && (it + 1 == cfg.n_burnin / 2 || it + 1 == (3 * cfg.n_burnin) / 4)) {
      update_from_history(b);
      b.window_accepted = b.window_proposed = 0;
      continue;
    }
    if (window_end && b.window_proposed > 0) {
      const double r = static_cast<double>(b.window_accepted) / b.window_proposed;
      b.scale *= std::exp(std::clamp(2.0 * (r - 0.25), -1.5, 1.5));
      b.window_accepted = b.window_proposed = 0;
    }
  }
}

std::vector<EngineBlock> make_blocks(BlockModel& model, const Eigen::VectorXd& x,
                                     const std::vector<std::pair<std::string, std::vector<int>>>& spec,
                                     const std::vector<bool>& free, const SamplerConfig& cfg) {
  std::vector<EngineBlock> out;
  for (std::size_t b = 0; b < spec.size(); ++b) {
    EngineBlock eb;
    eb.name = spec[b].first;
    eb.model_block = b;
    for (int c : spec[b].second) {
      if (free.empty() || free[static_cast<std::size_t>(c)]) eb.idx.push_back(c);
    }
    if (eb.idx.empty()) continue;
    eb.chol = initial_cholesky(model, eb, x);
    if (auto it = cfg.proposal_scale.find(eb.name); it != cfg.proposal_scale.end()) eb.scale = it->second;
    out.push_back(std::move(eb));
  }
  return out;
}

void check_blocks(const std::vector<EngineBlock>& blocks) {
  for (const auto& b : blocks) {
    if (b.post_proposed >= 20 && b.post_accepted == 0) {
      fail(ErrorKind::Diagnostics, "sampler block " + b.name + " rejected every proposal after burn-in");
    }
  }
}

void record_diagnostics(const std::vector<EngineBlock>& blocks, SamplerDiagnostics& diag) {
  for (const auto& b : blocks) {
    BlockDiagnostics bd;
    bd.name = b.name;
    bd.proposals = b.post_proposed;
    bd.acceptance_rate = b.post_proposed ? static_cast<double>(b.post_accepted) / b.post_proposed : 0.0;
    bd.burnin_acceptance_rate = b.burn_proposed ? static_cast<double>(b.burn_accepted) / b.burn_proposed : 0.0;
    bd.final_scale = b.scale;
    diag.blocks.push_back(bd);
  }
}

void summarize(const std::vector<Eigen::VectorXd>& kept, const std::vector<EngineBlock>& blocks,
               const std::vector<std::string>& names, SamplerDiagnostics& diag) {
  if (kept.empty()) return;
  for (const auto& b : blocks) {
    for (int c : b.idx) {
      std::vector<double> chain(kept.size());
      for (std::size_t k = 0; k < kept.size(); ++k) chain[k] = kept[k][c];
      CoordinateSummary s;
      s.name = names[static_cast<std::size_t>(c)];
      const double m = std::accumulate(chain.begin(), chain.end(), 0.0) / static_cast<double>(chain.size());
      double ss = 0.0;
      for (double v : chain) ss += (v - m) * (v - m);
      s.mean = m;
      s.sd = chain.size() > 1 ? std::sqrt(ss / static_cast<double>(chain.size() - 1)) : 0.0;
      s.ess = effective_sample_size(chain);
      diag.coordinates.push_back(s);
    }
  }
}

}  // namespace

void validate(const SamplerConfig& c) {
  require(c.n_iterations > 0, ErrorKind::Config, "sampler n_iterations must be > 0");
  require(c.n_burnin >= 0 && c.n_burnin < c.n_iterations, ErrorKind::Config, "sampler needs 0 <= n_burnin < n_iterations");
  require(c.n_thin >= 1, ErrorKind::Config, "sampler n_thin must be >= 1");
  require(c.adapt_window >= 1, ErrorKind::Config, "sampler adapt_window must be >= 1");
  for (const auto& [name, s] : c.proposal_scale) {
    require(s > 0.0 && std::isfinite(s), ErrorKind::Config, "proposal scale for block " + name + " must be > 0");
  }
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (x[t] - m) * (x[t + lag] - m);
    return s / static_cast<double>(n);
  };
  const double c0 = acov(0);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  double tau = -1.0;
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    const double pair = (acov(k) + acov(k + 1)) / c0;
    if (pair <= 0.0) break;
    tau += 2.0 * pair;
  }
  tau = std::max(tau, 1.0 / static_cast<double>(n));
  return static_cast<double>(n) / tau;
}

PosteriorSample sample_posterior(std::span<const SubjectHistory> data, const Priors& priors,
                                 const SamplerConfig& cfg, const SamplerInit& init) {
  validate(cfg);
  require(!data.empty(), ErrorKind::Input, "sample_posterior: empty dataset");
  const int p_z = static_cast<int>(data.front().z.size());
  const ThetaLayout tl(p_z);
  const AlphaLayout al;
  require(init.theta_free.empty() || init.theta_free.size() == tl.size(), ErrorKind::Config,
          "theta free mask has the wrong length");
  require(init.alpha_free.empty() || init.alpha_free.size() == al.size(), ErrorKind::Config,
          "alpha free mask has the wrong length");

  const Eigen::VectorXd x0 = tl.pack(init.theta);
  ThetaModel tmodel(data, tl, priors, x0);
  std::vector<std::pair<std::string, std::vector<int>>> tspec;
  for (auto b : {ThetaBlock::A1, ThetaBlock::A2, ThetaBlock::Y, ThetaBlock::U, ThetaBlock::Tmax, ThetaBlock::L}) {
    tspec.emplace_back(to_string(b), tl.block(b));
  }
  Chain tchain{&tmodel, x0, {}, RngStream(cfg.seed, 0)};
  tchain.blocks = make_blocks(tmodel, x0, tspec, init.theta_free, cfg);

  const Eigen::VectorXd a0 = al.pack(init.alpha);
  std::unique_ptr<AlphaModel> amodel;
  Chain achain{nullptr, a0, {}, RngStream(cfg.seed, 1)};
  if (cfg.sample_alpha) {
    amodel = std::make_unique<AlphaModel>(data, al, priors, a0);
    achain.model = amodel.get();
    std::vector<std::pair<std::string, std::vector<int>>> aspec;
    for (auto b : {AlphaBlock::A1, AlphaBlock::A2, AlphaBlock::Tmax}) aspec.emplace_back(to_string(b), al.block(b));
    achain.blocks = make_blocks(*amodel, a0, aspec, init.alpha_free, cfg);
  }

  PosteriorSample out;
  std::vector<Eigen::VectorXd> kept_t, kept_a;
  for (int it = 0; it < cfg.n_iterations; ++it) {
    const bool burnin = it < cfg.n_burnin;
    for (auto& b : tchain.blocks) step_block(tchain, b, burnin);
    if (amodel) {
      for (auto& b : achain.blocks) step_block(achain, b, burnin);
    }
    if (burnin) {
      adapt(tchain, it, cfg);
      if (amodel) adapt(achain, it, cfg);
      if (it + 1 == cfg.n_burnin) {
        for (auto* ch : {&tchain, &achain}) {
          for (auto& b : ch->blocks) std::vector<Eigen::VectorXd>().swap(b.history);
        }
      }
      continue;
    }
    if ((it - cfg.n_burnin + 1) % cfg.n_thin != 0) continue;
    PosteriorDraw d;
    d.theta = tl.unpack(tchain.x);
    d.alpha = amodel ? al.unpack(achain.x) : init.alpha;
    d.log_post = tmodel.current() + (amodel ? amodel->current() : 0.0);
    d.draw_index = static_cast<int>(out.draws.size());
    out.draws.push_back(std::move(d));
    kept_t.push_back(tchain.x);
    if (amodel) kept_a.push_back(achain.x);
  }

  check_blocks(tchain.blocks);
  check_blocks(achain.blocks);
  record_diagnostics(tchain.blocks, out.diagnostics);
  record_diagnostics(achain.blocks, out.diagnostics);
  summarize(kept_t, tchain.blocks, tl.names(), out.diagnostics);
  summarize(kept_a, achain.blocks, al.names(), out.diagnostics);
  return out;
}

ObsWorldParams em_initial_theta(std::span<const SubjectHistory> data, int iterations, const MleOptions& opt) {
  require(!data.empty(), ErrorKind::Input, "em_initial_theta: empty dataset");
  const auto base = fit_mle(data, MleModel::ObsIgnoreU, {}, opt).theta;
  const MsmData msm(data);
  std::vector<double> resid(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    resid[i] = data[i].y - outcome_mean(data[i], base, 0, msm.exposure(i, base.outcome.kernel));
  }
  std::vector<double> sorted = resid;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(sorted.size() / 2), sorted.end());
  const double median = sorted[sorted.size() / 2];
  std::vector<double> q(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) q[i] = resid[i] > median ? 0.9 : 0.1;

  ObsWorldParams th = fit_obs_fractional_u(data, q, {}, opt);
  for (int it = 0; it < iterations; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double next = conditional_posterior_u(data[i], th);
      change = std::max(change, std::abs(next - q[i]));
      q[i] = next;
    }
    th = fit_obs_fractional_u(data, q, {}, opt);
    if (change < 1e-4) break;
  }
  return th;
}

}  // namespace ctmsm
