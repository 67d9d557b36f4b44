#pragma once

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "audits.hpp"
#include "engel.hpp"
#include "model_io.hpp"
#include "report.hpp"

namespace engel_lab::cli {

using nlohmann::json;

enum ExitCode { kPass = 0, kFail = 1, kUsage = 2, kInconclusive = 3 };

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InconclusiveError*>(&e)) return kInconclusive;
  if (dynamic_cast<const CheckFailed*>(&e) || dynamic_cast<const RankError*>(&e) ||
      dynamic_cast<const DomainError*>(&e))
    return kFail;
  return kUsage;
}

inline const char* verdict_for(int code) {
  switch (code) {
    case kPass: return "pass";
    case kFail: return "fail";
    case kInconclusive: return "inconclusive";
    default: return "error";
  }
}

struct Common {
  std::string model = "sol";
  int samples = 8;
  std::uint64_t seed = 0;
  std::string out;
  std::string csv;
};

struct Outcome {
  int code = kPass;
  json result = json::object();
};

/// Flow, splitting, certificate and constructed pair shared by the construction commands.
struct PipelineOptions {
  std::string method = "flow";
  std::string plus = "D+";
  std::string minus = "D-";
  double split_T = 20.0;
  double cert_T = 20.0;
  double dt = 0.25;
  bool numeric = false;
  double step = 1e-3;
  double average = 0.0;
  int average_steps = 100;
  double kappa = 30.0;
  int quadrature = 61;
};

inline json pipeline_config(const PipelineOptions& o) {
  return {{"method", o.method},   {"split_T", o.split_T},   {"T", o.cert_T},
          {"dt", o.dt},           {"numeric", o.numeric},   {"step", o.step},
          {"average", o.average}, {"average_steps", o.average_steps},
          {"kappa", o.kappa},     {"quadrature", o.quadrature}};
}

inline SplittingEstimate make_splitting(const ManifoldModel& m, const Flow& flow, const std::vector<Point>& grid,
                                        const std::string& method, const std::string& plus, const std::string& minus,
                                        double T, int checkpoints = 80) {
  SplittingOptions so;
  so.T = T;
  so.checkpoints = checkpoints;
  if (method == "flow") return splitting_from_flow(flow, grid, so);
  return splitting_from_planes(flow, m.distribution(plus), m.distribution(minus), grid, so);
}

struct Pipeline {
  Flow flow;
  SplittingEstimate splitting;
  QuotientMetric metric;
  HyperbolicityCertificate certificate;
  BiEngelConstruction construction;
};

inline Pipeline build_pipeline(const ManifoldModel& m, const std::vector<Point>& grid, const PipelineOptions& o) {
  Flow flow(m, FlowOptions{o.step, !o.numeric});
  SplittingEstimate split = make_splitting(m, flow, grid, o.method, o.plus, o.minus, o.split_T);
  QuotientMetric g = identity_metric();
  if (o.average > 0.0) g = average_metric(flow, g, o.average, o.average_steps);
  CertificateOptions co;
  co.T = o.cert_T;
  co.dt = o.dt;
  HyperbolicityCertificate cert = certify_weak_hyperbolicity(flow, split, g, co);
  ConstructionOptions opt;
  opt.mollifier = {o.kappa, o.quadrature};
  BiEngelConstruction con = construct_bi_engel(flow, split, cert, g, opt);
  return {std::move(flow), std::move(split), std::move(g), std::move(cert), std::move(con)};
}

inline Point parse_point(const ManifoldModel& m, const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw UsageError("--point: '" + item + "' is not a number");
    }
  }
  if (v.size() != 4) throw UsageError("--point needs four comma-separated coordinates");
  return m.point(Vec4(v[0], v[1], v[2], v[3]));
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

/// Max over samples of the angle between the characteristic line of E and W.
inline double characteristic_vs_flow(const ManifoldModel& m, const DistributionSpec& e, const std::vector<Point>& grid) {
  DistributionSpec w{"W", {m.flow_field()}};
  const auto c = detail::bracket_ready(m, {&e, &w});
  const auto angles = parallel_map<double>(grid.size(), [&](std::size_t i) {
    const Vec4 v = characteristic_line(c[0], grid[i]).components;
    return angle_to_span(v, c[1].evaluate(grid[i]));
  });
  return *std::max_element(angles.begin(), angles.end());
}

inline double max_abs_divergence(const ManifoldModel& m, const std::vector<Point>& grid) {
  double d = 0.0;
  for (const auto& p : grid) d = std::max(d, std::abs(divergence(m, m.flow_field(), p)));
  return d;
}

/// Divergence, isotropy and W -> -W swap diagnostics for a flow splitting.
inline json structural(const ManifoldModel& m, const Flow& flow, const SplittingEstimate& split,
                       const std::vector<Point>& grid) {
  json s;
  s["jacobi_residual"] = report::num(m.jacobi_residual);
  const double div = max_abs_divergence(m, grid);
  s["divergence_max"] = report::num(div);
  if (m.has_distribution("E") && div <= 1e-9) {
    double iso = 0.0, cross = std::numeric_limits<double>::infinity();
    for (const auto& x : split.samples) {
      const auto r = isotropy_residual(flow, x);
      iso = std::max(iso, r.residual);
      cross = std::min(cross, std::abs(r.cross));
    }
    s["isotropy_residual"] = report::num(iso);
    s["cross_dalpha_min"] = report::num(cross);
  } else {
    s["isotropy_residual"] = nullptr;
    s["cross_dalpha_min"] = nullptr;
  }
  // Flow-method splittings of W and -W; the plane method is not symmetric under the swap.
  SplittingOptions so;
  so.T = split.T;
  try {
    const auto neg = splitting_from_flow(flow.negated(), grid, so);
    const auto sw = swapped(split.method == "power-direction" ? split : splitting_from_flow(flow, grid, so));
    double dist = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i)
      dist = std::max({dist, projective_distance(neg.samples[i].e_plus, sw.samples[i].e_plus),
                       projective_distance(neg.samples[i].e_minus, sw.samples[i].e_minus)});
    s["swap_residual"] = report::num(dist);
  } catch (const Error& e) {
    s["swap_residual"] = nullptr;
    s["swap_error"] = e.what();
  }
  return s;
}

/// Parses args (without the program name), runs the subcommand, writes the JSON report to out.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"engel_lab: Engel, bi-Engel and hyperbolicity checks on 4-manifold models", "engel_lab"};
  app.set_version_flag("--version", std::string(report::kVersion));
  app.require_subcommand(1, 1);

  Common common;
  std::map<CLI::App*, std::function<Outcome(json&)>> handlers;
  std::map<CLI::App*, int> default_samples;

  auto add_common = [&](CLI::App* sub, int samples) {
    default_samples[sub] = samples;
    sub->add_option("--model", common.model, "built-in name or model JSON path")->capture_default_str();
    sub->add_option("--samples", common.samples, "number of seeded sample points (default " + std::to_string(samples) + ")")
        ->check(CLI::PositiveNumber);
    sub->add_option("--seed", common.seed, "seed for sample points and randomized sweeps")->capture_default_str();
    sub->add_option("--out", common.out, "also write the JSON report to this path");
  };
  auto grid_of = [&](const ManifoldModel& m) { return sample_points(m, common.samples, common.seed); };

  // verify-even-contact
  {
    auto* sub = app.add_subcommand("verify-even-contact", "check that a rank-3 distribution is even contact");
    add_common(sub, 8);
    auto dist = std::make_shared<std::string>("E");
    auto tol = std::make_shared<double>(kDefaultRankTol);
    sub->add_option("--dist", *dist)->capture_default_str();
    sub->add_option("--tol", *tol)->capture_default_str()->check(CLI::PositiveNumber);
    handlers[sub] = [&, dist, tol](json& cfg) {
      cfg["dist"] = *dist;
      cfg["tol"] = *tol;
      const ManifoldModel m = resolve_model(common.model);
      const auto grid = grid_of(m);
      const DistributionSpec& e = m.distribution(*dist);
      const auto rep = is_even_contact(e, grid, *tol);
      Outcome o;
      o.result["model"] = report::model(m);
      o.result["even_contact"] = report::even_contact(rep);
      o.result["grid"] = report::points(grid);
      o.result["characteristic_vs_W"] = rep.pass ? report::num(characteristic_vs_flow(m, e, grid)) : json(nullptr);
      o.result["divergence_max"] = report::num(max_abs_divergence(m, grid));
      o.code = rep.pass ? kPass : kFail;
      return o;
    };
  }

  // verify-engel
  {
    auto* sub = app.add_subcommand("verify-engel", "check that a rank-2 distribution is Engel");
    add_common(sub, 8);
    auto dist = std::make_shared<std::string>("D+");
    auto tol = std::make_shared<double>(kDefaultRankTol);
    auto ctol = std::make_shared<double>(1e-6);
    sub->add_option("--dist", *dist)->capture_default_str();
    sub->add_option("--tol", *tol, "relative singular-value cutoff")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--containment-tol", *ctol, "max angle between the characteristic line of E and the plane")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    handlers[sub] = [&, dist, tol, ctol](json& cfg) {
      cfg["dist"] = *dist;
      cfg["tol"] = *tol;
      cfg["containment_tol"] = *ctol;
      const ManifoldModel m = resolve_model(common.model);
      const auto grid = grid_of(m);
      const auto rep = is_engel(m, m.distribution(*dist), grid, *tol);
      Outcome o;
      o.result["model"] = report::model(m);
      o.result["engel"] = report::engel(rep);
      o.result["grid"] = report::points(grid);
      bool contained = true;
      if (rep.pass && m.has_distribution("E")) {
        const auto c = characteristic_containment(m, m.distribution(*dist), m.distribution("E"), grid);
        o.result["containment"] = report::containment(c);
        contained = c.max_angle < *ctol;
      } else {
        o.result["containment"] = nullptr;
      }
      o.code = rep.pass && contained ? kPass : kFail;
      return o;
    };
  }

  // certify-bi-engel
  {
    auto* sub = app.add_subcommand("certify-bi-engel", "certify a pair of Engel planes as bi-Engel");
    add_common(sub, 8);
    auto plus = std::make_shared<std::string>("D+");
    auto minus = std::make_shared<std::string>("D-");
    auto opt = std::make_shared<BiEngelOptions>();
    sub->add_option("--plus", *plus)->capture_default_str();
    sub->add_option("--minus", *minus)->capture_default_str();
    sub->add_option("--tol", opt->tol, "intersection and shared-E tolerance")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--engel-tol", opt->engel_tol)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--scan-length", opt->scan_length, "orbit length scanned for coincidences")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--scan-steps", opt->scan_steps)->capture_default_str()->check(CLI::PositiveNumber);
    handlers[sub] = [&, plus, minus, opt](json& cfg) {
      cfg["plus"] = *plus;
      cfg["minus"] = *minus;
      cfg["tol"] = opt->tol;
      cfg["engel_tol"] = opt->engel_tol;
      cfg["scan_length"] = opt->scan_length;
      cfg["scan_steps"] = opt->scan_steps;
      const ManifoldModel m = resolve_model(common.model);
      const auto grid = grid_of(m);
      const auto cert = certify_bi_engel(m, m.distribution(*plus), m.distribution(*minus), grid, *opt);
      Outcome o;
      o.result["model"] = report::model(m);
      o.result["certificate"] = report::bi_engel(cert);
      o.result["grid"] = report::points(grid);
      o.code = cert.pass ? kPass : kFail;
      return o;
    };
  }

  // splitting
  {
    auto* sub = app.add_subcommand("splitting", "estimate the splitting E/W = E+ + E-");
    add_common(sub, 8);
    auto method = std::make_shared<std::string>("planes");
    auto plus = std::make_shared<std::string>("D+");
    auto minus = std::make_shared<std::string>("D-");
    auto T = std::make_shared<double>(20.0);
    auto checkpoints = std::make_shared<int>(80);
    auto numeric = std::make_shared<bool>(false);
    auto step = std::make_shared<double>(1e-3);
    auto fit = std::make_shared<std::vector<double>>(std::vector<double>{2.0, 15.0});
    sub->add_option("--method", *method)->capture_default_str()->check(CLI::IsMember({"planes", "flow"}));
    sub->add_option("--plus", *plus)->capture_default_str();
    sub->add_option("--minus", *minus)->capture_default_str();
    sub->add_option("--T", *T)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--checkpoints", *checkpoints)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_flag("--numeric", *numeric, "use the chart integrator instead of the exact Lie backend");
    sub->add_option("--step", *step)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--fit", *fit, "time window [t0 t1] of the gap decay fit (planes method)")->expected(2);
    handlers[sub] = [&, method, plus, minus, T, checkpoints, numeric, step, fit](json& cfg) {
      cfg["method"] = *method;
      cfg["plus"] = *plus;
      cfg["minus"] = *minus;
      cfg["T"] = *T;
      cfg["checkpoints"] = *checkpoints;
      cfg["numeric"] = *numeric;
      cfg["step"] = *step;
      cfg["fit"] = *fit;
      const ManifoldModel m = resolve_model(common.model);
      const auto grid = grid_of(m);
      const Flow flow(m, FlowOptions{*step, !*numeric});
      const auto split = make_splitting(m, flow, grid, *method, *plus, *minus, *T, *checkpoints);
      Outcome o;
      o.result["model"] = report::model(m);
      json samples = json::array();
      double worst_rate = std::numeric_limits<double>::quiet_NaN();
      for (const auto& s : split.samples) {
        json j = report::splitting_sample(s);
        if (*method == "planes" && (*fit)[1] <= *T) {
          const double rate = -gap_decay_rate(s, (*fit)[0], (*fit)[1]);
          j["decay_rate"] = report::num(rate);
          if (std::isnan(worst_rate) || std::abs(rate) < std::abs(worst_rate)) worst_rate = rate;
        }
        samples.push_back(j);
      }
      o.result["method"] = split.method;
      o.result["exact"] = split.exact;
      o.result["samples"] = samples;
      o.result["min_decay_rate"] = std::isnan(worst_rate) ? json(nullptr) : report::num(worst_rate);
      if (!common.csv.empty() && !split.samples.empty()) {
        std::ostringstream os;
        os << "t,gap\n";
        const auto& s = split.samples.front();
        for (std::size_t i = 0; i < s.times.size(); ++i) os << format_double(s.times[i]) << ',' << format_double(s.gaps[i]) << '\n';
        write_file(common.csv, os.str());
      }
      return o;
    };
    sub->add_option("--csv", common.csv, "gap series of the first sample (planes method)");
  }

  // certify-hyperbolic
  {
    auto* sub = app.add_subcommand("certify-hyperbolic", "certify the rate gap lambda+/lambda- >= K e^{ct}");
    add_common(sub, 8);
    auto po = std::make_shared<PipelineOptions>();
    auto compare = std::make_shared<double>(0.0);
    sub->add_option("--method", po->method)->capture_default_str()->check(CLI::IsMember({"planes", "flow"}));
    sub->add_option("--T", po->cert_T, "certificate horizon")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--split-T", po->split_T, "splitting horizon")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--dt", po->dt)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_flag("--numeric", po->numeric, "use the chart integrator instead of the exact Lie backend");
    sub->add_option("--step", po->step)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--average", po->average, "also certify with the metric averaged over [0, T]")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--average-steps", po->average_steps)->capture_default_str()->check(CLI::Range(2, 100000));
    sub->add_option("--compare-numeric", *compare, "also certify on the chart integrator with this horizon")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--csv", common.csv, "per-checkpoint log lambda+/- of the main certificate");
    handlers[sub] = [&, po, compare](json& cfg) {
      cfg = pipeline_config(*po);
      cfg.erase("kappa");
      cfg.erase("quadrature");
      cfg["compare_numeric"] = *compare;
      const ManifoldModel m = resolve_model(common.model);
      const auto grid = grid_of(m);
      const Flow flow(m, FlowOptions{po->step, !po->numeric});
      const auto split = make_splitting(m, flow, grid, po->method, po->plus, po->minus, po->split_T);
      CertificateOptions co;
      co.T = po->cert_T;
      co.dt = po->dt;
      const auto cert = certify_weak_hyperbolicity(flow, split, identity_metric(), co);
      Outcome o;
      o.result["model"] = report::model(m);
      o.result["certificate"] = report::hyperbolic(cert);
      bool ok = cert.valid && verify_certificate(cert);
      if (po->average > 0.0) {
        const auto g = average_metric(flow, identity_metric(), po->average, po->average_steps);
        const auto avg = certify_weak_hyperbolicity(flow, split, g, co);
        o.result["averaged"] = report::hyperbolic(avg);
        ok = ok && avg.valid;
      }
      if (*compare > 0.0) {
        const Flow nf(m, FlowOptions{po->step, false});
        const auto ns = make_splitting(m, nf, grid, po->method, po->plus, po->minus, po->split_T);
        CertificateOptions nco = co;
        nco.T = *compare;
        const auto nc = certify_weak_hyperbolicity(nf, ns, identity_metric(), nco);
        o.result["numeric"] = report::hyperbolic(nc);
        ok = ok && nc.valid;
      }
      o.result["structural"] = structural(m, flow, split, grid);
      if (!common.csv.empty()) {
        std::ostringstream os;
        report::write_growth_csv(os, cert);
        write_file(common.csv, os.str());
      }
      o.code = ok ? kPass : kFail;
      return o;
    };
  }

  // construct-bi-engel
  {
    auto* sub = app.add_subcommand("construct-bi-engel", "build a bi-Engel pair from the flow's splitting");
    add_common(sub, 8);
    auto po = std::make_shared<PipelineOptions>();
    auto scan = std::make_shared<BiEngelOptions>();
    scan->scan_steps = 32;
    auto rot_T = std::make_shared<double>(20.0);
    auto rot_step = std::make_shared<double>(0.05);
    sub->add_option("--method", po->method)->capture_default_str()->check(CLI::IsMember({"planes", "flow"}));
    sub->add_option("--T", po->cert_T, "certificate horizon")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--split-T", po->split_T, "splitting horizon")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--dt", po->dt)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_flag("--numeric", po->numeric);
    sub->add_option("--step", po->step)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--average", po->average)->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--kappa", po->kappa, "mollifier width 1/kappa")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--quadrature", po->quadrature, "Simpson nodes")->capture_default_str()->check(CLI::Range(3, 100001));
    sub->add_option("--tol", scan->tol)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--scan-length", scan->scan_length)->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--scan-steps", scan->scan_steps)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--rotation-T", *rot_T, "rotation profile horizon of each constructed plane (0 skips)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--rotation-step", *rot_step)->capture_default_str()->check(CLI::PositiveNumber);
    handlers[sub] = [&, po, scan, rot_T, rot_step](json& cfg) {
      cfg = pipeline_config(*po);
      cfg["tol"] = scan->tol;
      cfg["scan_length"] = scan->scan_length;
      cfg["scan_steps"] = scan->scan_steps;
      cfg["rotation_T"] = *rot_T;
      cfg["rotation_step"] = *rot_step;
      const ManifoldModel m = resolve_model(common.model);
      const auto grid = grid_of(m);
      Outcome o;
      o.result["model"] = report::model(m);
      if (m.has_distribution("E")) {
        const auto ec = is_even_contact(m.distribution("E"), grid);
        o.result["even_contact"] = report::even_contact(ec);
        o.result["characteristic_vs_W"] =
            ec.pass ? report::num(characteristic_vs_flow(m, m.distribution("E"), grid)) : json(nullptr);
      }
      const Pipeline pl = build_pipeline(m, grid, *po);
      o.result["hyperbolic"] = report::hyperbolic(pl.certificate);
      o.result["construction"] = {{"engel_plus", report::engel(pl.construction.engel_plus)},
                                  {"engel_minus", report::engel(pl.construction.engel_minus)},
                                  {"nodes", mollifier_nodes(pl.construction.options.mollifier).size()}};
      json ref = nullptr;
      if (m.has_distribution("D+") && m.has_distribution("D-")) {
        double ap = 0.0, am = 0.0;
        for (const auto& p : grid) {
          ap = std::max(ap, largest_principal_angle(pl.construction.plus.evaluate(p), m.distribution("D+").evaluate(p)));
          am = std::max(am, largest_principal_angle(pl.construction.minus.evaluate(p), m.distribution("D-").evaluate(p)));
        }
        ref = {{"plus", report::num(ap)}, {"minus", report::num(am)}};
      }
      o.result["angle_to_model_planes"] = ref;
      const auto cert = certify_bi_engel(m, pl.construction.plus, pl.construction.minus, grid, *scan);
      o.result["certificate"] = report::bi_engel(cert);
      SplittingOptions so;
      so.T = po->split_T;
      const auto back = splitting_from_planes(pl.flow, pl.construction.plus, pl.construction.minus, grid, so);
      double rt = 0.0;
      for (std::size_t i = 0; i < grid.size(); ++i)
        rt = std::max({rt, projective_distance(back.samples[i].e_plus, pl.splitting.samples[i].e_plus),
                       projective_distance(back.samples[i].e_minus, pl.splitting.samples[i].e_minus)});
      o.result["round_trip"] = report::num(rt);
      if (*rot_T > 0.0) {
        RotationOptions ro;
        ro.T = *rot_T;
        ro.step = *rot_step;
        o.result["rotation"] = {{"plus", report::rotation(rotation_profile(pl.flow, pl.construction.plus, grid[0], ro))},
                                {"minus", report::rotation(rotation_profile(pl.flow, pl.construction.minus, grid[0], ro))}};
      }
      o.code = cert.pass ? kPass : kFail;
      return o;
    };
  }

  // rotation-profile
  {
    auto* sub = app.add_subcommand("rotation-profile", "unwrapped rotation of a plane transported back along W");
    add_common(sub, 1);
    auto dist = std::make_shared<std::string>("D+");
    auto constructed = std::make_shared<bool>(false);
    auto ro = std::make_shared<RotationOptions>();
    auto pt = std::make_shared<std::string>();
    auto po = std::make_shared<PipelineOptions>();
    sub->add_option("--dist", *dist, "model distribution, or D+/D- of the constructed pair")->capture_default_str();
    sub->add_flag("--constructed", *constructed, "profile the plane built by construct-bi-engel");
    sub->add_option("--T", ro->T)->capture_default_str()->check(CLI::NonNegativeNumber);
    sub->add_option("--step", ro->step)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--point", *pt, "seed point x,y,z,w (default: the sample grid)");
    sub->add_option("--kappa", po->kappa)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--quadrature", po->quadrature)->capture_default_str()->check(CLI::Range(3, 100001));
    sub->add_option("--csv", common.csv, "t,theta,total_variation of the first profile");
    handlers[sub] = [&, dist, constructed, ro, pt, po](json& cfg) {
      cfg["dist"] = *dist;
      cfg["constructed"] = *constructed;
      cfg["T"] = ro->T;
      cfg["step"] = ro->step;
      cfg["point"] = pt->empty() ? json(nullptr) : json(*pt);
      if (*constructed) {
        cfg["kappa"] = po->kappa;
        cfg["quadrature"] = po->quadrature;
      }
      const ManifoldModel m = resolve_model(common.model);
      std::vector<Point> grid = grid_of(m);
      std::vector<Point> seeds = pt->empty() ? grid : std::vector<Point>{parse_point(m, *pt)};
      std::optional<Pipeline> pl;
      const DistributionSpec* d = nullptr;
      Flow flow(m);
      if (*constructed) {
        if (*dist != "D+" && *dist != "D-") throw UsageError("--constructed needs --dist D+ or D-");
        pl = build_pipeline(m, grid, *po);
        d = *dist == "D+" ? &pl->construction.plus : &pl->construction.minus;
        flow = pl->flow;
      } else {
        d = &m.distribution(*dist);
      }
      const auto profiles = parallel_map<RotationProfile>(seeds.size(), [&](std::size_t i) { return rotation_profile(flow, *d, seeds[i], *ro); });
      Outcome o;
      o.result["model"] = report::model(m);
      json arr = json::array();
      bool full = false;
      for (const auto& p : profiles) {
        arr.push_back(report::rotation(p));
        full = full || p.full_turn;
      }
      o.result["profiles"] = arr;
      o.result["full_turn"] = full;
      if (!common.csv.empty()) {
        std::ostringstream os;
        write_rotation_csv(os, profiles.front());
        write_file(common.csv, os.str());
      }
      o.code = full ? kFail : kPass;
      return o;
    };
  }

  // cross-ratio-audit
  {
    auto* sub = app.add_subcommand("cross-ratio-audit", "seeded cross-ratio identities and the orbit series");
    add_common(sub, 1);
    auto ao = std::make_shared<CrossRatioAuditOptions>();
    auto tol = std::make_shared<double>(1e-9);
    auto plus = std::make_shared<std::string>("D+");
    auto minus = std::make_shared<std::string>("D-");
    sub->add_option("--count4", ao->homography_tuples, "random 4-tuples for homography invariance")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--count6", ao->chain_tuples, "random 6-tuples for the chain relation")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--ordered", ao->ordered_tuples, "ordered 6-tuples for the inequality")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--T", ao->T)->capture_default_str()->check(CLI::Range(1.0, 1e6));
    sub->add_option("--dt", ao->dt)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--tol", *tol)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--plus", *plus)->capture_default_str();
    sub->add_option("--minus", *minus)->capture_default_str();
    sub->add_option("--csv", common.csv, "t,theta_plus,theta_minus,cr of the series");
    handlers[sub] = [&, ao, tol, plus, minus](json& cfg) {
      ao->seed = common.seed;
      cfg["count4"] = ao->homography_tuples;
      cfg["count6"] = ao->chain_tuples;
      cfg["ordered"] = ao->ordered_tuples;
      cfg["T"] = ao->T;
      cfg["dt"] = ao->dt;
      cfg["tol"] = *tol;
      cfg["plus"] = *plus;
      cfg["minus"] = *minus;
      const ManifoldModel m = resolve_model(common.model);
      const auto grid = grid_of(m);
      const Flow flow(m);
      const auto a = cross_ratio_audit(flow, m.distribution(*plus), m.distribution(*minus), grid[0], *ao);
      Outcome o;
      o.result = report::cross_ratio(a);
      o.result["model"] = report::model(m);
      o.result["series"]["point"] = report::point(grid[0]);
      const bool ok = a.homography_residual < *tol && a.chain_residual < *tol && a.ordered_violations == 0 &&
                      a.alpha > 1.0 && a.series_monotone && a.series_dominates;
      if (!common.csv.empty()) {
        std::ostringstream os;
        write_cross_ratio_csv(os, a.series);
        write_file(common.csv, os.str());
      }
      o.code = ok ? kPass : kFail;
      return o;
    };
  }

  // oracle-diff
  {
    auto* sub = app.add_subcommand("oracle-diff", "exact Lie backend against the chart integrator");
    add_common(sub, 8);
    auto T = std::make_shared<double>(5.0);
    auto dt = std::make_shared<double>(0.5);
    auto step = std::make_shared<double>(1e-3);
    auto tol = std::make_shared<double>(1e-6);
    auto slope_tol = std::make_shared<double>(0.1);
    sub->add_option("--T", *T)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--dt", *dt)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--step", *step)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--tol", *tol)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--slope-tol", *slope_tol)->capture_default_str()->check(CLI::PositiveNumber);
    handlers[sub] = [&, T, dt, step, tol, slope_tol](json& cfg) {
      cfg["T"] = *T;
      cfg["dt"] = *dt;
      cfg["step"] = *step;
      cfg["tol"] = *tol;
      cfg["slope_tol"] = *slope_tol;
      const ManifoldModel m = resolve_model(common.model);
      const auto d = oracle_diff(m, grid_of(m), *T, *dt, *step);
      Outcome o;
      o.result = report::oracle(d);
      o.result["model"] = report::model(m);
      o.code = d.holonomy_residual < *tol && std::abs(d.fd_slope - 2.0) <= *slope_tol ? kPass : kFail;
      return o;
    };
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kPass : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  if (sub->get_option("--samples")->count() == 0) common.samples = default_samples.at(sub);
  json cfg = json::object();
  json rep{{"schema", report::kSchema},
           {"tool", report::kTool},
           {"version", report::kVersion},
           {"command", sub->get_name()},
           {"argv", args},
           {"seed", common.seed}};
  const auto start = std::chrono::steady_clock::now();
  int code = kPass;
  try {
    Outcome o = handlers.at(sub)(cfg);
    code = o.code;
    rep["result"] = std::move(o.result);
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    rep["result"] = nullptr;
    rep["error"] = e.what();
    err << "engel_lab " << sub->get_name() << ": " << e.what() << '\n';
  }
  cfg["model"] = common.model;
  cfg["samples"] = common.samples;
  cfg["seed"] = common.seed;
  cfg["out"] = common.out.empty() ? json(nullptr) : json(common.out);
  cfg["csv"] = common.csv.empty() ? json(nullptr) : json(common.csv);
  rep["config"] = cfg;
  rep["verdict"] = verdict_for(code);
  rep["exit_code"] = code;
  rep["wall_clock"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string text = rep.dump(2) + "\n";
  out << text;
  if (!common.out.empty()) {
    try {
      write_file(common.out, text);
    } catch (const UsageError& e) {
      err << "engel_lab: " << e.what() << '\n';
      return kUsage;
    }
  }
  return code;
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace engel_lab::cli
