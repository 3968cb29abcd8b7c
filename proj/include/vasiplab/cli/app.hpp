#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <locale>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "../blocks.hpp"
#include "../centering.hpp"
#include "../cone.hpp"
#include "../covariance.hpp"
#include "../decay.hpp"
#include "../gauss_embed.hpp"
#include "../green_kubo.hpp"
#include "../lemma_scaling.hpp"
#include "../limits.hpp"
#include "../orbit.hpp"
#include "../params.hpp"
#include "../quenched.hpp"
#include "../schedule.hpp"
#include "../ulam.hpp"
#include "config.hpp"

namespace vasiplab::cli {

enum ExitCode : int { kPass = 0, kTestFailure = 1, kUsageError = 2 };

struct RunContext {
  ExperimentConfig cfg;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::optional<double> alpha;
  std::optional<int> d;
  std::optional<double> margin;
};

struct Artifact {
  std::string name;
  std::string content;
};

struct RunResult {
  nlohmann::json result = nlohmann::json::object();
  std::vector<Artifact> files;
  bool pass = true;
};

/// Plain-text table with '.' decimals and 17 significant digits.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& header) {
    os_.imbue(std::locale::classic());
    os_.precision(17);
    os_ << std::boolalpha;
    os_ << header << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    std::size_t i = 0;
    ((os_ << (i++ ? "," : "") << cells), ...);
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

inline std::string pairs_csv(const std::string& header, const std::vector<std::pair<double, double>>& pts) {
  CsvWriter w(header);
  for (const auto& [a, b] : pts) w.row(a, b);
  return w.str();
}

namespace detail {

inline MapSchedule schedule_of(const RunContext& ctx) { return build_schedule(ctx.cfg.schedule(), ctx.seed, "/schedule"); }

inline MapSchedule stationary_schedule_of(const RunContext& ctx, const char* what) {
  auto s = schedule_of(ctx);
  if (!s.is_stationary()) throw ValidationError(std::string(what) + " needs a stationary schedule", "/schedule");
  return s;
}

inline CovarianceTrace ensemble_trace(const RunContext& ctx, const Section& sec, const MapSchedule& s,
                                      const Observable& phi, std::int64_t n, std::uint64_t m, EnsembleSums& sums) {
  const auto n_bins = sec.positive("n_bins", 4096);
  const auto n_min = sec.positive("n_min", 10);
  const double rho = sec.number("rho", 1.3);
  if (m < 2) throw ValidationError("needs at least two orbits", sec.at("m"));
  OperatorCache cache(s.alpha_max(), ctx.workers);
  const Eigen::MatrixXd means = ulam_means(phi, s, n, n_bins, cache);
  EnsembleOptions eo;
  eo.workers = ctx.workers;
  eo.dither = sec.boolean("dither", true);
  const Ensemble ens(s, m, n, ctx.seed, eo);
  sums = ensemble_sums(ens, phi, means, geometric_checkpoints(std::min(n_min, n), n, rho), SumsOptions{true});
  return covariance_trace(sums);
}

inline Eigen::MatrixXd matrix_from_json(const Section& sec, const std::string& key) {
  if (!sec.has(key) || !sec.raw(key).is_array() || sec.raw(key).empty())
    throw ValidationError("expected a non-empty array of rows", sec.at(key));
  const auto& a = sec.raw(key);
  const auto d = static_cast<Eigen::Index>(a.size());
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const auto& row = a[static_cast<std::size_t>(i)];
    const auto path = sec.at(key) + "/" + std::to_string(i);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d) throw ValidationError("expected a row of length " + std::to_string(d), path);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!row[static_cast<std::size_t>(j)].is_number()) throw ValidationError("expected a number", path + "/" + std::to_string(j));
      m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
  }
  return m;
}

inline VasipParams params_of(const RunContext& ctx, const Section& sec) {
  const double alpha = ctx.alpha ? *ctx.alpha : sec.number("alpha", 0.25);
  const int d = ctx.d ? *ctx.d : static_cast<int>(sec.positive("d", 1));
  const double margin = ctx.margin ? *ctx.margin : sec.number("margin", 1e-4);
  return vasip_gamma(alpha, d, margin);
}

}  // namespace detail

inline RunResult run_simulate(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("simulate");
  sec.allow({"n", "m", "x0", "orbit_length", "n_bins", "n_min", "rho", "dither"});
  const auto s = detail::schedule_of(ctx);
  const auto phi = ctx.cfg.observable();
  const auto n = sec.positive("n", 10000);
  const auto m = static_cast<std::uint64_t>(sec.positive("m", 1000));
  const double x0 = sec.number("x0", 0.3);
  const auto len = sec.positive("orbit_length", std::min<std::int64_t>(n, 10000));

  RunResult r;
  const Orbit orbit = iterate_orbit(s, x0, len);
  CsvWriter ow("k,x");
  ow.row(0, x0);
  for (std::size_t k = 0; k < orbit.points.size(); ++k) ow.row(k + 1, orbit.points[k]);

  EnsembleSums sums;
  const auto trace = detail::ensemble_trace(ctx, sec, s, phi, n, m, sums);
  r.result = {{"schedule", to_json(s)},
              {"n", n},
              {"m", m},
              {"orbit_final", orbit.points.empty() ? x0 : orbit.points.back()},
              {"sigma2_over_n", matrix_json(trace.entries.back() / static_cast<double>(n))},
              {"standard_error_over_n", matrix_json(trace.standard_errors.back() / static_cast<double>(n))},
              {"lambda_min", trace.lambda_min.back()}};
  r.files = {{"orbit.csv", ow.str()}, {"trace.csv", trace_csv(trace)}};
  return r;
}

inline RunResult run_ulam(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("ulam");
  sec.allow({"beta", "alpha_max", "n_bins", "export_operator"});
  PMParam p;
  if (sec.has("beta")) {
    p = PMParam(sec.number("beta"), sec.number("alpha_max", 0.49));
  } else {
    p = detail::stationary_schedule_of(ctx, "ulam").param(1);
  }
  const auto n_bins = sec.positive("n_bins", 4096);
  const UlamOperator op(p, n_bins, ctx.workers);
  const DensityGrid h = invariant_density(op);

  RunResult r;
  CsvWriter dw("bin,x,density");
  const auto xs = bin_centers(n_bins);
  for (Eigen::Index b = 0; b < n_bins; ++b) dw.row(b, xs[b], h[b]);
  r.files.push_back({"ulam_density.csv", dw.str()});
  if (sec.boolean("export_operator", false)) {
    std::ostringstream os;
    os.imbue(std::locale::classic());
    op.write_csv(os);
    r.files.push_back({"ulam_operator.csv", os.str()});
  }
  const double defect = l1_norm(op.apply(h) - h);
  r.result = {{"beta", p.beta},         {"alpha_max", p.alpha_max}, {"n_bins", n_bins},
              {"nnz", op.matrix().nonZeros()}, {"integral", integral(h)}, {"density_min", h.minCoeff()},
              {"density_max", h.maxCoeff()},   {"fixed_point_defect", defect}};
  r.pass = h.minCoeff() >= 0.0 && defect < 1e-8;
  return r;
}

inline RunResult run_decay(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("decay");
  sec.allow({"kind", "i", "j", "n_min", "n_max", "n_bins", "slack", "alpha", "fit_min", "fit_max"});
  DecayKind kind;
  try {
    kind = parse_decay_kind(sec.string("kind", "A4"));
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), sec.at("kind"));
  }
  const bool stationary_kind = kind == DecayKind::A4 || kind == DecayKind::A5 || kind == DecayKind::A6;
  const auto s = stationary_kind ? detail::stationary_schedule_of(ctx, "stationary decay kinds") : detail::schedule_of(ctx);
  const auto phi = ctx.cfg.observable();
  DecayOptions o;
  o.slack = sec.number("slack", 1.0);
  o.alpha = sec.optional_number("alpha");
  o.workers = ctx.workers;
  const NRange range{sec.integer("n_min", 1), sec.integer("n_max", 200)};
  if (sec.has("fit_min") || sec.has("fit_max"))
    o.fit_range = NRange{sec.integer("fit_min", range.min), sec.integer("fit_max", range.max)};
  const auto rep =
      check_decay(s, phi, kind, sec.integer("i", 0), sec.integer("j", 0), range, sec.positive("n_bins", 4096), o);
  RunResult r;
  r.result = to_json(rep);
  r.pass = rep.pass;
  r.files.push_back({"decay.csv", pairs_csv("n,value", rep.points)});
  if (!rep.correlations.empty()) r.files.push_back({"decay_correlations.csv", pairs_csv("n,correlation", rep.correlations)});
  return r;
}

inline RunResult run_cone(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("cone");
  sec.allow({"a", "alpha", "alpha_max", "n_bins", "betas", "powers", "offsets", "M", "n_grid", "tolerance",
             "min_pass_rate"});
  const ConeSpec spec(sec.number("a", 20.0), sec.number("alpha", 0.25));
  const auto n_bins = sec.positive("n_bins", 8192);
  const double alpha_max = sec.number("alpha_max", 0.49);
  const double tol = sec.number("tolerance", 1e-6);
  const double min_rate = sec.number("min_pass_rate", 0.95);
  const auto phi = ctx.cfg.observable();

  std::vector<GridFunction> samples;
  for (double pw : sec.numbers("powers", std::vector<double>{0.0, spec.alpha / 2.0, spec.alpha}))
    for (double c : sec.numbers("offsets", std::vector<double>{0.0, 0.5, 1.0})) samples.push_back(power_family_sample(pw, c, n_bins));

  RunResult r;
  nlohmann::json inv = nlohmann::json::array();
  for (double beta : sec.numbers("betas", std::vector<double>{0.1, 0.25})) {
    const auto rep = check_cone_invariance(PMParam(beta, alpha_max), spec, samples, n_bins, tol);
    const bool ok = rep.pass_rate >= min_rate && rep.worst_margin >= -tol;
    r.pass = r.pass && ok;
    inv.push_back({{"beta", beta}, {"samples", rep.samples}, {"passed", rep.passed}, {"pass_rate", rep.pass_rate},
                   {"worst_margin", rep.worst_margin}, {"pass", ok}});
  }

  const GridFunction h = sample_function(uniform_grid(sec.positive("n_grid", 2000)), [](double) { return 1.0; });
  const double M = sec.number("M", 1.0);
  CsvWriter dw("component,x,h1,h2");
  nlohmann::json dec = nlohmann::json::array();
  for (int c = 0; c < phi.dim(); ++c) {
    const Component& comp = phi.component(c);
    try {
      const auto d = cone_decompose(comp, h, spec, comp.lipschitz, M);
      dec.push_back({{"component", c},
                     {"lambda", d.lambda},
                     {"v", d.v},
                     {"delta", d.delta},
                     {"identity_error", d.identity_error},
                     {"integral_gap", d.integral_gap},
                     {"h1", to_json(d.m1, spec)},
                     {"h2", to_json(d.m2, spec)}});
      for (Eigen::Index i = 0; i < h.size(); ++i) dw.row(c, h.x[i], d.h1.f[i], d.h2.f[i]);
      r.pass = r.pass && d.identity_error <= 1e-12 && d.integral_gap <= 1e-12;
    } catch (const SearchFailure& e) {
      dec.push_back({{"component", c}, {"error", e.what()}});
      r.pass = false;
    }
  }
  r.result = {{"a", spec.a}, {"alpha", spec.alpha}, {"n_bins", n_bins}, {"invariance", inv}, {"decompositions", dec}};
  r.files.push_back({"cone_decomposition.csv", dw.str()});
  return r;
}

inline RunResult run_blocks(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("blocks");
  sec.allow({"c", "a", "horizon", "alpha", "d", "margin", "max_rows"});
  double c = 0.0, a = 0.0;
  std::string source = "config";
  if (sec.has("c") || sec.has("a")) {
    c = sec.number("c");
    a = sec.number("a");
  } else {
    const auto p = detail::params_of(ctx, sec);
    c = p.c;
    a = p.a;
    source = "vasip_gamma";
  }
  const auto plan = block_plan(c, a, sec.positive("horizon", 200));
  const auto chk = check_block_plan(plan);
  RunResult r;
  r.pass = chk.ok;
  r.result = to_json(plan);
  r.result["source"] = source;
  r.result["ok"] = chk.ok;
  r.result["violations"] = chk.violations;
  CsvWriter sw("n,start,len,c_n,sub_len,remainder");
  for (const auto& b : plan.blocks) sw.row(b.n, b.start, b.len, b.c_n, b.sub_len, b.remainder);
  r.files.push_back({"blocks_summary.csv", sw.str()});
  try {
    r.files.push_back({"blocks.csv", block_plan_csv(plan, static_cast<std::uint64_t>(sec.positive("max_rows", 1000000)))});
    r.result["subblock_rows_written"] = true;
  } catch (const ValidationError&) {
    r.result["subblock_rows_written"] = false;
  }
  return r;
}

inline RunResult run_clt(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("clt");
  sec.allow({"n", "m", "n_bins", "n_min", "rho", "dither", "projections", "threshold", "degenerate_ratio"});
  const auto s = detail::schedule_of(ctx);
  const auto phi = ctx.cfg.observable();
  const auto n = sec.positive("n", 10000);
  EnsembleSums sums;
  const auto trace = detail::ensemble_trace(ctx, sec, s, phi, n, static_cast<std::uint64_t>(sec.positive("m", 5000)), sums);
  CLTOptions o;
  o.projections = static_cast<int>(sec.positive("projections", 16));
  o.threshold = sec.optional_number("threshold");
  o.degenerate_ratio = sec.number("degenerate_ratio", 1e-3);
  o.seed = derive_seed(ctx.seed, 0xC17);
  const auto rep = self_norming_clt(sums, trace, n, o);
  RunResult r;
  r.result = to_json(rep);
  r.pass = rep.pass;
  r.files.push_back({"trace.csv", trace_csv(trace)});
  return r;
}

inline RunResult run_lil(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("lil");
  sec.allow({"n", "m", "n_bins", "n_min", "rho", "dither", "low", "high", "degenerate_ratio", "variance", "n_terms"});
  const auto s = detail::schedule_of(ctx);
  const auto phi = ctx.cfg.observable();
  const auto n = sec.positive("n", 1000000);
  EnsembleSums sums;
  auto trace = detail::ensemble_trace(ctx, sec, s, phi, n, static_cast<std::uint64_t>(sec.positive("m", 15)), sums);
  const auto variance = sec.string("variance", s.is_stationary() ? "green_kubo" : "ensemble");
  nlohmann::json gk_json;
  if (variance == "green_kubo") {
    if (!s.is_stationary()) throw ValidationError("green_kubo variance needs a stationary schedule", sec.at("variance"));
    GreenKuboOptions go;
    go.workers = ctx.workers;
    const auto gk = green_kubo(phi, s.param(1), static_cast<int>(sec.positive("n_terms", 200)), sec.positive("n_bins", 4096), go);
    trace = linear_trace(sums.checkpoints, gk.sigma2);
    gk_json = to_json(gk);
  } else if (variance != "ensemble") {
    throw ValidationError("expected ensemble or green_kubo", sec.at("variance"));
  }
  LILOptions o;
  o.low = sec.number("low", 0.5);
  o.high = sec.number("high", 1.5);
  o.degenerate_ratio = sec.number("degenerate_ratio", 1e-3);
  const auto rep = lil_band(sums, trace, o);
  RunResult r;
  r.result = to_json(rep);
  r.result["variance"] = variance;
  if (!gk_json.is_null()) r.result["green_kubo"] = gk_json;
  r.pass = rep.pass;
  r.files.push_back({"trace.csv", trace_csv(trace)});
  return r;
}

inline RunResult run_lemmas(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("lemmas");
  sec.allow({"kinds", "n_min", "n_max", "n_bins", "ensemble", "rho", "slack", "alpha", "eps", "block_start"});
  const auto s = detail::schedule_of(ctx);
  const auto phi = ctx.cfg.observable();
  std::vector<std::string> all;
  for (const char* k : {"sublinear", "cond_bound", "cond_second", "higher_moment", "cross_block", "maximal"}) all.push_back(k);
  const auto names = sec.strings("kinds", all);
  const NRange range{sec.positive("n_min", 20), sec.positive("n_max", 400)};
  LemmaOptions o;
  o.slack = sec.optional_number("slack");
  o.alpha = sec.optional_number("alpha");
  o.eps = sec.optional_number("eps");
  o.block_start = sec.positive("block_start", 1);
  o.ensemble = static_cast<std::uint64_t>(sec.positive("ensemble", 10000));
  o.rho = sec.number("rho", 1.3);
  o.seed = ctx.seed;
  o.workers = ctx.workers;
  const auto n_bins = sec.positive("n_bins", 4096);

  RunResult r;
  r.result = nlohmann::json::array();
  CsvWriter w("kind,n,value");
  for (std::size_t i = 0; i < names.size(); ++i) {
    LemmaKind kind;
    try {
      kind = parse_lemma_kind(names[i]);
    } catch (const ValidationError& e) {
      throw ValidationError(e.what(), sec.at("kinds") + "/" + std::to_string(i));
    }
    const auto rep = check_lemma_scaling(kind, s, phi, range, n_bins, o);
    r.result.push_back(to_json(rep));
    r.pass = r.pass && rep.pass;
    for (const auto& [n, v] : rep.points) w.row(names[i], n, v);
  }
  r.files.push_back({"lemma_points.csv", w.str()});
  return r;
}

inline RunResult run_embed(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("embed");
  sec.allow({"c", "horizon", "d", "drift_exponent", "drift_scale", "bp"});
  const double c = sec.number("c", 4.0);
  const auto d = sec.positive("d", 1);
  const double ex = sec.number("drift_exponent", 0.6);
  const double sc = sec.number("drift_scale", 1.0);
  const CovarianceSequence H = [=](std::int64_t k) {
    return Eigen::MatrixXd(Eigen::MatrixXd::Identity(d, d) * (1.0 + sc * std::pow(static_cast<double>(k), -ex)));
  };
  const auto er = embed_matching_error(H, c, derive_seed(ctx.seed, 0xE3BED), sec.positive("horizon", 40));

  const auto bp = sec.child("bp");
  bp.allow({"kappa", "v", "d", "N", "variance_exponent", "convergence_exponent"});
  BPSeriesOptions bo;
  bo.variance_exponent = bp.optional_number("variance_exponent");
  bo.convergence_exponent = bp.number("convergence_exponent", 1.05);
  const auto br = bp_series_check(bp.number("kappa", 2.0), bp.number("v", 10.0), static_cast<int>(bp.positive("d", 1)),
                                  bp.positive("N", 100000), bo);
  RunResult r;
  r.result = {{"embedding", to_json(er)}, {"bp_series", to_json(br)}};
  r.pass = (er.fitted_exponent < 0.5) && br.convergent;
  CsvWriter ew("m,error");
  for (std::size_t i = 0; i < er.m.size(); ++i) ew.row(er.m[i], er.error[i]);
  CsvWriter pw("n,partial_sum");
  for (const auto& [n, v] : br.partial_sums) pw.row(n, v);
  r.files = {{"embed_errors.csv", ew.str()}, {"bp_partial_sums.csv", pw.str()}};
  return r;
}

inline RunResult run_params(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("params");
  sec.allow({"alpha", "d", "margin", "rational"});
  const auto p = detail::params_of(ctx, sec);
  const auto chain = check_constraint_chain(p);
  RunResult r;
  r.result = {{"params", to_json(p)}, {"chain", to_json(chain)}, {"clt", to_json(clt_gamma1_t<double>(p.alpha))}};
  if (sec.boolean("rational", false)) {
    const auto q = vasip_gamma_rational(p.alpha, p.d, p.margin);
    r.result["rational"] = to_json(q);
  }
  r.pass = chain.all_hold;
  CsvWriter w("group,name,slack,holds,boundary");
  for (const auto& c : chain.constraints) w.row("constraint", c.name, c.slack, c.holds, c.boundary);
  for (const auto& c : chain.intermediate) w.row("intermediate", c.name, c.slack, c.holds, c.boundary);
  r.files.push_back({"constraints.csv", w.str()});
  return r;
}

inline RunResult run_quenched(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("quenched");
  sec.allow({"omegas", "n", "ensemble", "n_bins", "n_iter", "n_min", "rho", "tol"});
  const auto s = detail::schedule_of(ctx);
  if (!s.driver()) throw ValidationError("quenched needs a schedule of kind driver", "/schedule/kind");
  const Driver& drv = *s.driver();
  const auto omegas = sec.integers("omegas", std::vector<std::int64_t>{0, 17, 301, -40, 1000});
  if (omegas.empty()) throw ValidationError("expected at least one omega", sec.at("omegas"));
  QuenchedOptions o;
  o.n_bins = sec.positive("n_bins", 8192);
  o.n_iter = sec.positive("n_iter", 200);
  o.ensemble = static_cast<std::uint64_t>(sec.positive("ensemble", 10000));
  o.seed = ctx.seed;
  o.alpha_max = s.alpha_max();
  o.rho = sec.number("rho", 1.3);
  o.n_min = sec.positive("n_min", 10);
  o.workers = ctx.workers;
  const double tol = sec.number("tol", 1e-2);
  const auto rep = quenched_stats(drv, omegas, ctx.cfg.observable(), sec.positive("n", 10000), o);

  OperatorCache cache(o.alpha_max, ctx.workers);
  nlohmann::json eq = nlohmann::json::array();
  std::vector<FiberDensity> fds;
  bool eq_ok = true;
  for (const auto& f : rep.fibers) {
    const double defect = check_equivariance(drv, f.density, o.n_bins, cache);
    eq_ok = eq_ok && defect < tol && f.density.converged;
    eq.push_back({{"omega", f.omega}, {"defect", defect}});
    fds.push_back(f.density);
  }
  RunResult r;
  r.result = to_json(rep);
  r.result["equivariance"] = eq;
  r.pass = rep.agree && rep.split_dims_agree && eq_ok;
  r.files.push_back({"fiber_densities.csv", fiber_density_csv(fds)});
  return r;
}

inline RunResult run_split(const RunContext& ctx) {
  const auto sec = ctx.cfg.section("split");
  sec.allow({"source", "n_terms", "n_bins", "matrix", "zero_tol", "t"});
  const auto source = sec.string("source", "green_kubo");
  RunResult r;
  Eigen::MatrixXd sigma2;
  if (source == "green_kubo") {
    const auto s = detail::stationary_schedule_of(ctx, "split");
    GreenKuboOptions go;
    go.workers = ctx.workers;
    const auto gk = green_kubo(ctx.cfg.observable(), s.param(1), static_cast<int>(sec.positive("n_terms", 30)),
                               sec.positive("n_bins", 4096), go);
    sigma2 = gk.sigma2;
    r.result["green_kubo"] = to_json(gk);
    r.pass = gk.converged;
  } else if (source == "matrix") {
    sigma2 = detail::matrix_from_json(sec, "matrix");
  } else {
    throw ValidationError("expected green_kubo or matrix", sec.at("source"));
  }
  const auto cs = covariance_split(sigma2, sec.optional_number("zero_tol"));
  r.result["sigma2"] = matrix_json(sigma2);
  r.result["split"] = to_json(cs);
  CsvWriter w("i,j,sigma2,pi1,pi2");
  for (Eigen::Index i = 0; i < sigma2.rows(); ++i)
    for (Eigen::Index j = 0; j < sigma2.cols(); ++j) w.row(i, j, sigma2(i, j), cs.pi1(i, j), cs.pi2(i, j));
  r.files.push_back({"split.csv", w.str()});
  if (sec.has("t")) {
    const auto bs = split_covariance(sigma2, sec.number("t"));
    r.result["block_split"] = to_json(bs);
    CsvWriter bw("i,j,A,A1,A2,A3");
    for (Eigen::Index i = 0; i < bs.A.rows(); ++i)
      for (Eigen::Index j = 0; j < bs.A.cols(); ++j) bw.row(i, j, bs.A(i, j), bs.A1(i, j), bs.A2(i, j), bs.A3(i, j));
    r.files.push_back({"block_split.csv", bw.str()});
  }
  return r;
}

inline RunResult run_command(const std::string& cmd, const RunContext& ctx) {
  static const std::map<std::string, std::function<RunResult(const RunContext&)>> table = {
      {"simulate", run_simulate}, {"ulam", run_ulam},     {"decay", run_decay},   {"cone", run_cone},
      {"blocks", run_blocks},     {"clt", run_clt},       {"lil", run_lil},       {"lemmas", run_lemmas},
      {"embed", run_embed},       {"params", run_params}, {"quenched", run_quenched}, {"split", run_split}};
  const auto it = table.find(cmd);
  if (it == table.end()) throw ValidationError("unknown subcommand " + cmd);
  return it->second(ctx);
}

/// The report is {"command", "seed", "pass", "config", "result"}.
inline nlohmann::json report_json(const std::string& cmd, const RunContext& ctx, const RunResult& r) {
  return {{"command", cmd}, {"seed", ctx.seed}, {"pass", r.pass}, {"config", ctx.cfg.raw}, {"result", r.result}};
}

inline void write_artifacts(const std::filesystem::path& out, const std::string& cmd, const nlohmann::json& report,
                            const std::vector<Artifact>& files) {
  std::filesystem::create_directories(out);
  auto put = [&](const std::string& name, const std::string& content) {
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (out / name).string());
    f << content;
  };
  put(cmd + ".json", report.dump(2) + "\n");
  for (const auto& a : files) put(a.name, a.content);
}

inline int main(int argc, char** argv) {
  CLI::App app{"VASIP lab: Pomeau-Manneville sequential and random maps"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "vasiplab_out";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<double> alpha, margin;
  std::optional<int> d;
  app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--seed", seed, "master seed, overrides the config");
  app.add_option("--workers", workers, "worker threads; falls back to the config, then VASIPLAB_WORKERS");
  app.add_option("--alpha", alpha, "alpha for params and blocks");
  app.add_option("--d", d, "dimension for params and blocks")->check(CLI::PositiveNumber);
  app.add_option("--margin", margin, "gamma margin above gamma_inf")->check(CLI::NonNegativeNumber);
  for (const auto& name : subcommands()) app.add_subcommand(name, "run the " + name + " experiment")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kUsageError;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  RunContext ctx;
  RunResult result;
  try {
    if (!config_path.empty()) ctx.cfg = load_config(config_path);
    ctx.seed = seed ? *seed : ctx.cfg.seed.value_or(0);
    ctx.workers = workers ? *workers : ctx.cfg.workers.value_or(0);
    ctx.alpha = alpha;
    ctx.d = d;
    ctx.margin = margin;
    result = run_command(cmd, ctx);
  } catch (const ValidationError& e) {
    std::cerr << "vasiplab " << cmd << ": invalid configuration: " << e.what() << '\n';
    return kUsageError;
  } catch (const DomainError& e) {
    std::cerr << "vasiplab " << cmd << ": " << e.what() << '\n';
    return kUsageError;
  } catch (const DimensionMismatch& e) {
    std::cerr << "vasiplab " << cmd << ": " << e.what() << '\n';
    return kUsageError;
  } catch (const NumericalError& e) {
    std::cerr << "vasiplab " << cmd << ": numerical failure: " << e.what() << '\n';
    return kTestFailure;
  }
  write_artifacts(out_dir, cmd, report_json(cmd, ctx, result), result.files);
  std::cout << cmd << ": " << (result.pass ? "pass" : "FAIL") << " (" << out_dir << "/" << cmd << ".json)\n";
  return result.pass ? kPass : kTestFailure;
}

}  // namespace vasiplab::cli
