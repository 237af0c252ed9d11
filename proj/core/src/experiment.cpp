#include "agpforge/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

#include "agpforge/agp.hpp"
#include "agpforge/dynamics.hpp"
#include "agpforge/model.hpp"
#include "agpforge/qpt.hpp"
#include "agpforge/qsl.hpp"
#include "agpforge/ring.hpp"
#include "agpforge/spectral.hpp"

namespace agpforge {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// Collects written files and their hashes for the manifest.
class OutputSink {
 public:
  explicit OutputSink(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir_ / name).string());
    out << content;
    out.close();
    files_.push_back({name, fnv1a64_hex(content)});
  }

  const std::vector<ManifestFile>& files() const { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::vector<ManifestFile> files_;
};

void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// --- JSON pieces -----------------------------------------------------------

CoeffSchedule coeff_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "constant") return CoeffSchedule::constant(j.at("value").get<double>());
  if (kind == "linear")
    return CoeffSchedule::linear(j.value("a", 0.0), j.value("b", 1.0));
  if (kind == "cosine")
    return CoeffSchedule::cosine(j.value("amp", 1.0), j.value("freq", 1.0), j.value("phase", 0.0));
  if (kind == "identity") return CoeffSchedule::identity();
  throw std::invalid_argument("unknown coefficient schedule kind: " + kind);
}

Schedule schedule_from_json(const json& j) {
  const std::string kind = j.value("kind", "annealing");
  const double t_final = j.value("T", 1.0);
  if (kind == "annealing") return Schedule::annealing(t_final);
  if (kind == "linear") return Schedule::linear(j.value("from", 0.0), j.value("to", 1.0), t_final);
  if (kind == "cosine") return Schedule::cosine(j.value("from", -2.0), j.value("to", 2.0), t_final);
  if (kind == "constant") return Schedule::constant(j.value("value", 0.0), t_final);
  throw std::invalid_argument("unknown schedule kind: " + kind);
}

ParametricHamiltonian system_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "single-spin")
    return single_spin_system(coeff_from_json(j.at("hx")), coeff_from_json(j.at("hy")),
                              coeff_from_json(j.at("hz")));
  if (type == "two-spin")
    return two_spin_system(j.value("chi0", -1.0),
                           j.contains("delta") ? coeff_from_json(j.at("delta"))
                                               : CoeffSchedule::identity(),
                           j.value("omega0", -1.0));
  if (type == "ising") return transverse_ising_chain(j.at("L").get<int>());
  if (type == "terms") {
    const auto& terms = j.at("terms");
    std::vector<PauliString> basis;
    std::vector<CoeffSchedule> coeffs;
    for (const auto& term : terms) {
      basis.push_back(PauliString::from_text(term.at("string").get<std::string>()));
      coeffs.push_back(coeff_from_json(term.at("coeff")));
    }
    auto values = [coeffs](double l) {
      std::vector<double> v(coeffs.size());
      for (std::size_t i = 0; i < coeffs.size(); ++i) v[i] = coeffs[i].value(l);
      return v;
    };
    auto derivs = [coeffs](double l) {
      std::vector<double> v(coeffs.size());
      for (std::size_t i = 0; i < coeffs.size(); ++i) v[i] = coeffs[i].derivative(l);
      return v;
    };
    return ParametricHamiltonian(std::move(basis), values, derivs);
  }
  throw std::invalid_argument("unknown system type: " + type);
}

// --- two-spin shared pieces --------------------------------------------------

struct TwoSpinSetup {
  ParametricHamiltonian h;
  AgpBasis basis;                                  // grouped under site swap
  std::size_t orbit_y = 0, orbit_xy = 0, orbit_yz = 0;
};

TwoSpinSetup two_spin_setup(double chi0, double omega0) {
  TwoSpinSetup setup{two_spin_system(chi0, CoeffSchedule::identity(), omega0), {}, 0, 0, 0};
  const double probes[] = {-2.0, 0.37, 2.0};
  setup.basis = generate_basis_multi(setup.h, probes);
  setup.basis.grouping =
      detect_orbits(setup.basis.strings, {{1, 0}}, setup.h.operator_at(0.37));
  for (std::size_t o = 0; o < setup.basis.orbit_count(); ++o) {
    const std::string label = setup.basis.orbit_label(o);
    if (label == "IY") setup.orbit_y = o;
    if (label == "XY") setup.orbit_xy = o;
    if (label == "YZ") setup.orbit_yz = o;
  }
  return setup;
}

// cases (a)-(d): none, Y truncation, XY truncation, YZ truncation
std::vector<std::pair<std::string, AgpField>> two_spin_cases(const TwoSpinSetup& setup) {
  std::vector<std::pair<std::string, AgpField>> cases;
  cases.emplace_back("a", AgpField{});
  cases.emplace_back("b", make_truncated_cd(setup.h, setup.basis, {setup.orbit_y}));
  cases.emplace_back("c", make_truncated_cd(setup.h, setup.basis, {setup.orbit_xy}));
  cases.emplace_back("d", make_truncated_cd(setup.h, setup.basis, {setup.orbit_yz}));
  return cases;
}

// --- Ising shared pieces -----------------------------------------------------

struct IsingCase {
  std::string label;        // "ref", "trunc_K2", "var_K2", ...
  std::optional<int> k;
  std::string mode;         // "none" | "truncate" | "restricted"
  AgpField field;
};

std::vector<IsingCase> ising_cases(const ParametricHamiltonian& chain, const RingBasis& ring,
                                   const std::vector<std::optional<int>>& k_list,
                                   const std::vector<std::string>& modes) {
  const AgpBasis full = to_agp_basis(ring);
  std::vector<IsingCase> cases;
  bool ref_added = false;
  for (const auto& k : k_list) {
    if (!k) {
      if (!ref_added) cases.push_back({"ref", std::nullopt, "none", AgpField{}});
      ref_added = true;
      continue;
    }
    for (const auto& mode : modes) {
      IsingCase c;
      c.k = k;
      c.mode = mode;
      if (mode == "truncate") {
        std::vector<std::size_t> keep;
        for (std::size_t o = 0; o < full.orbit_count(); ++o)
          if (full.orbit_order(o) <= *k) keep.push_back(o);
        c.label = "trunc_K" + std::to_string(*k);
        c.field = make_truncated_cd(chain, full, keep);
      } else if (mode == "restricted") {
        c.label = "var_K" + std::to_string(*k);
        c.field = make_restricted_cd(chain, to_agp_basis(ring.restricted_to_order(*k)));
      } else {
        throw std::invalid_argument("unknown ising mode: " + mode);
      }
      cases.push_back(std::move(c));
    }
  }
  return cases;
}

// --- experiment bodies -------------------------------------------------------

json run_single_spin_check(const json& cfg, std::uint64_t seed, int, OutputSink& sink) {
  const int samples = cfg.value("samples", 100);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);

  std::string csv = "hx,hz,dhx,dhz,alpha_solver,alpha_closed_form,rel_err\n";
  double max_rel = 0.0;
  AgpBasis basis;
  basis.n_sites = 1;
  basis.strings = {PauliString::from_text("Y")};
  int done = 0;
  while (done < samples) {
    const double hx = u(rng), hz = u(rng), dhx = u(rng), dhz = u(rng);
    if (hx * hx + hz * hz < 1e-2) continue;
    ++done;
    PauliOperator hop(1), dop(1);
    hop.add_term(PauliString::from_text("X"), hx);
    hop.add_term(PauliString::from_text("Z"), hz);
    dop.add_term(PauliString::from_text("X"), dhx);
    dop.add_term(PauliString::from_text("Z"), dhz);
    const AgpSolution sol = solve_exact(hop, dop, basis);
    const double closed = (hz * dhx - hx * dhz) / (2.0 * (hx * hx + hz * hz));
    const double rel = std::abs(sol.alpha(0) - closed) / std::max(1e-300, std::abs(closed));
    max_rel = std::max(max_rel, rel);
    csv += fmt(hx) + "," + fmt(hz) + "," + fmt(dhx) + "," + fmt(dhz) + "," + fmt(sol.alpha(0)) +
           "," + fmt(closed) + "," + fmt(rel) + "\n";
  }
  sink.write("samples.csv", csv);

  // rotating-field pinning run with the exact counterdiabatic term
  auto field_h = single_spin_system(
      CoeffSchedule{[](double l) { return std::sin(l); }, [](double l) { return std::cos(l); }},
      CoeffSchedule::constant(0.0),
      CoeffSchedule{[](double l) { return std::cos(l); }, [](double l) { return -std::sin(l); }});
  const Schedule sched = Schedule::linear(0.0, std::numbers::pi / 2, cfg.value("T", 1.0));
  const AgpBasis fb = generate_basis(field_h, 0.3);
  const EvolutionResult res = evolve(field_h, make_exact_cd(field_h, fb), sched,
                                     ground_state(field_h.operator_at(0.0)));
  std::string fid = "t,lambda,p0\n";
  double min_p = 1.0;
  for (std::size_t i = 0; i < res.times.size(); ++i) {
    fid += fmt(res.times[i]) + "," + fmt(sched.lambda_of_t(res.times[i])) + "," +
           fmt(res.fidelities[i]) + "\n";
    min_p = std::min(min_p, res.fidelities[i]);
  }
  sink.write("pinning.csv", fid);
  sink.write("plot.gp",
             "set datafile separator ','\nset key autotitle columnhead\n"
             "plot 'pinning.csv' using 1:3 with lines\n");

  return json{{"max_rel_err", max_rel}, {"min_pinned_fidelity", min_p},
              {"norm_drift", res.norm_drift}};
}

json run_two_spin_bound(const json& cfg, int, OutputSink& sink) {
  TwoSpinSetup setup = two_spin_setup(cfg.value("chi0", -1.0), cfg.value("omega0", -1.0));
  BoundProblem problem;
  problem.h = &setup.h;
  problem.basis = setup.basis;
  problem.sched = Schedule::cosine(-2.0, 2.0, cfg.value("T", 1.0));
  problem.n_panels = cfg.value("n_panels", 1024);
  problem.refine = false;
  const BoundGrid grid = build_bound_grid(problem);

  const auto cases = two_spin_cases(setup);
  std::vector<BoundResult> results;
  json bounds = json::array();
  for (const auto& [label, field] : cases) {
    BoundResult r = bound_for(grid, field);
    bounds.push_back({{"case", label},
                      {"B", r.bound},
                      {"fidelity_floor", r.fidelity_floor},
                      {"includes_dlambda_factor", r.includes_dlambda_factor}});
    results.push_back(std::move(r));
  }

  std::string csv = "delta,sigma_a,sigma_b,sigma_c,sigma_d\n";
  for (std::size_t j = 0; j < grid.lambdas.size(); ++j) {
    csv += fmt(grid.lambdas[j]);
    for (const auto& r : results) csv += "," + fmt(r.integrand[j]);
    csv += "\n";
  }
  sink.write("integrand.csv", csv);
  sink.write("bounds.json", bounds.dump(2) + "\n");
  sink.write("plot.gp",
             "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'delta_t'\n"
             "plot for [col=2:5] 'integrand.csv' using 1:col with lines\n");

  // dominant-term ranking from the same grid
  const PauliOperator hop = setup.h.operator_at(0.37);
  const AgpSolution full = solve_exact(hop, setup.h.derivative_at(0.37), setup.basis);
  json ranking = json::array();
  for (const auto& [orbit, b] : rank_terms(problem, full))
    ranking.push_back({{"orbit", setup.basis.orbit_label(orbit)}, {"B_if_kept_alone", b}});

  return json{{"bounds", bounds}, {"term_ranking", ranking}};
}

json run_two_spin_fidelity(const json& cfg, int threads, OutputSink& sink) {
  TwoSpinSetup setup = two_spin_setup(cfg.value("chi0", -1.0), cfg.value("omega0", -1.0));
  const std::vector<double> t_list = cfg.value("T_list", std::vector<double>{});
  const auto cases = two_spin_cases(setup);

  // bounds are T-independent line integrals; compute once at T = 1
  BoundProblem problem;
  problem.h = &setup.h;
  problem.basis = setup.basis;
  problem.sched = Schedule::cosine(-2.0, 2.0, 1.0);
  problem.n_panels = cfg.value("n_panels", 1024);
  problem.refine = false;
  const BoundGrid grid = build_bound_grid(problem);
  json bounds = json::array();
  std::vector<double> floors;
  for (const auto& [label, field] : cases) {
    const BoundResult r = bound_for(grid, field);
    bounds.push_back({{"case", label}, {"B", r.bound}, {"fidelity_floor", r.fidelity_floor}});
    floors.push_back(r.fidelity_floor);
  }

  const int n_jobs = static_cast<int>(t_list.size() * cases.size());
  std::vector<double> final_p(static_cast<std::size_t>(n_jobs));
  parallel_for(n_jobs, threads, [&](int job) {
    const auto ti = static_cast<std::size_t>(job) / cases.size();
    const auto ci = static_cast<std::size_t>(job) % cases.size();
    const Schedule sched = Schedule::cosine(-2.0, 2.0, t_list[ti]);
    const EvolutionResult res = evolve(setup.h, cases[ci].second, sched,
                                       ground_state(setup.h.operator_at(-2.0)));
    final_p[static_cast<std::size_t>(job)] = res.fidelities.back();
  });

  std::string csv = "T,p_a,p_b,p_c,p_d,floor_a,floor_b,floor_c,floor_d\n";
  for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
    csv += fmt(t_list[ti]);
    for (std::size_t ci = 0; ci < cases.size(); ++ci)
      csv += "," + fmt(final_p[ti * cases.size() + ci]);
    for (double f : floors) csv += "," + fmt(f);
    csv += "\n";
  }
  sink.write("fidelity.csv", csv);
  sink.write("bounds.json", bounds.dump(2) + "\n");
  sink.write("plot.gp",
             "set datafile separator ','\nset key autotitle columnhead\nset logscale x\n"
             "set xlabel 'T'\nplot for [col=2:5] 'fidelity.csv' using 1:col with linespoints\n");
  return json{{"bounds", bounds}};
}

json run_ising_fidelity(const json& cfg, int threads, OutputSink& sink) {
  const int L = cfg.value("L", 10);
  const std::vector<double> t_list = cfg.value("T_list", std::vector<double>{});
  std::vector<std::optional<int>> k_list;
  for (const auto& k : cfg.at("K_list")) {
    if (k.is_string() && k.get<std::string>() == "none") {
      k_list.push_back(std::nullopt);
    } else {
      k_list.push_back(k.get<int>());
    }
  }
  const std::vector<std::string> modes = cfg.value("modes", std::vector<std::string>{});

  auto chain = transverse_ising_chain(L);
  const RingBasis ring = ring_generate_basis(ring_ising(L, 0.37), ring_ising_derivative(L));
  const auto cases = ising_cases(chain, ring, k_list, modes);

  // T-invariant bounds per case
  BoundProblem problem;
  problem.h = &chain;
  problem.basis = to_agp_basis(ring);
  problem.sched = Schedule::annealing(1.0);
  problem.n_panels = cfg.value("n_panels", 64);
  problem.refine = false;
  const BoundGrid grid = build_bound_grid(problem);
  json bounds = json::array();
  for (const auto& c : cases) {
    const BoundResult r = bound_for(grid, c.field);
    bounds.push_back({{"case", c.label}, {"B", r.bound}, {"fidelity_floor", r.fidelity_floor}});
  }

  const int n_jobs = static_cast<int>(t_list.size() * cases.size());
  std::vector<double> final_p(static_cast<std::size_t>(n_jobs));
  parallel_for(n_jobs, threads, [&](int job) {
    const auto ti = static_cast<std::size_t>(job) / cases.size();
    const auto ci = static_cast<std::size_t>(job) % cases.size();
    const Schedule sched = Schedule::annealing(t_list[ti]);
    EvolveOptions opt;
    opt.n_steps = cfg.value("n_steps", 0);
    const EvolutionResult res =
        evolve(chain, cases[ci].field, sched, ground_state(chain.operator_at(0.0)), opt);
    final_p[static_cast<std::size_t>(job)] = res.fidelities.back();
  });

  std::string csv = "T";
  for (const auto& c : cases) csv += ",p_" + c.label;
  csv += "\n";
  for (std::size_t ti = 0; ti < t_list.size(); ++ti) {
    csv += fmt(t_list[ti]);
    for (std::size_t ci = 0; ci < cases.size(); ++ci)
      csv += "," + fmt(final_p[ti * cases.size() + ci]);
    csv += "\n";
  }
  sink.write("fidelity.csv", csv);
  sink.write("bounds.json", bounds.dump(2) + "\n");
  sink.write("plot.gp",
             "set datafile separator ','\nset key autotitle columnhead\nset logscale x\n"
             "set xlabel 'T'\nplot for [col=2:" + std::to_string(1 + cases.size()) +
                 "] 'fidelity.csv' using 1:col with linespoints\n");
  return json{{"bounds", bounds}, {"orbit_count", ring.orbit_count()}};
}

std::string scan_csv(const std::vector<ScanRecord>& records) {
  std::string csv = "g,L,K,rate,hs_norm_per_dim\n";
  for (const auto& r : records) {
    csv += fmt(r.g) + "," + std::to_string(r.n_sites) + ",";
    csv += r.k ? std::to_string(*r.k) : std::string("");
    csv += ",";
    csv += r.restriction_rate ? fmt(*r.restriction_rate) : std::string("");
    csv += "," + fmt(r.hs_norm_per_dim) + "\n";
  }
  return csv;
}

json run_qpt_size_scan(const json& cfg, int threads, OutputSink& sink) {
  const std::vector<double> g_list = cfg.value("g_list", std::vector<double>{});
  const std::vector<int> l_list = cfg.value("L_list", std::vector<int>{});
  const KPolicy policy =
      cfg.value("policy", std::string("exact")) == "fixed" ? KPolicy::fixed : KPolicy::exact;
  const int k = cfg.value("K", -1);

  std::vector<std::vector<ScanRecord>> per_g(g_list.size());
  parallel_for(static_cast<int>(g_list.size()), threads, [&](int gi) {
    per_g[static_cast<std::size_t>(gi)] =
        size_scan(g_list[static_cast<std::size_t>(gi)], l_list, policy, k);
  });

  std::vector<ScanRecord> all;
  json fits = json::array();
  for (std::size_t gi = 0; gi < g_list.size(); ++gi) {
    std::vector<double> x, y;
    for (const auto& r : per_g[gi]) {
      x.push_back(r.n_sites);
      y.push_back(r.hs_norm_per_dim);
      all.push_back(r);
    }
    const FitResult fit = fit_scaling(x, y);
    fits.push_back({{"g", g_list[gi]},
                    {"slope", fit.slope},
                    {"intercept", fit.intercept},
                    {"r_squared", fit.r_squared}});
  }
  sink.write("scan.csv", scan_csv(all));
  sink.write("fits.json", fits.dump(2) + "\n");
  sink.write("plot.gp",
             "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'L'\n"
             "plot 'scan.csv' using 2:5 with points\n");
  return json{{"fits", fits}};
}

json run_qpt_restriction_scan(const json& cfg, int threads, OutputSink& sink) {
  const std::vector<double> g_list = cfg.value("g_list", std::vector<double>{});
  const int L = cfg.value("L", 10);
  std::vector<int> k_list = cfg.value("K_list", std::vector<int>{});
  if (k_list.empty())
    for (int k = 0; k <= L - 2; ++k) k_list.push_back(k);

  std::vector<std::vector<ScanRecord>> per_g(g_list.size());
  parallel_for(static_cast<int>(g_list.size()), threads, [&](int gi) {
    per_g[static_cast<std::size_t>(gi)] =
        restriction_scan(g_list[static_cast<std::size_t>(gi)], L, k_list);
  });

  std::vector<ScanRecord> all;
  json fits = json::array();
  for (std::size_t gi = 0; gi < g_list.size(); ++gi) {
    std::vector<double> x, y;
    for (const auto& r : per_g[gi]) {
      x.push_back(*r.restriction_rate);
      y.push_back(r.hs_norm_per_dim);
      all.push_back(r);
    }
    const FitResult fit = fit_scaling(x, y);
    fits.push_back({{"g", g_list[gi]},
                    {"slope", fit.slope},
                    {"intercept", fit.intercept},
                    {"r_squared", fit.r_squared}});
  }
  sink.write("scan.csv", scan_csv(all));
  sink.write("fits.json", fits.dump(2) + "\n");
  sink.write("plot.gp",
             "set datafile separator ','\nset key autotitle columnhead\n"
             "set xlabel 'restriction rate'\nplot 'scan.csv' using 4:5 with linespoints\n");
  return json{{"fits", fits}};
}

json run_custom(const json& cfg, int, OutputSink& sink) {
  const ParametricHamiltonian h = system_from_json(cfg.at("system"));
  const Schedule sched = schedule_from_json(cfg.value("schedule", json{{"kind", "annealing"}}));
  const std::string mode = cfg.value("agp", json::object()).value("mode", "exact");

  const double l0 = sched.lambda_of_t(0.0);
  const double lT = sched.lambda_of_t(sched.t_final);
  const double probes[] = {l0, 0.5 * (l0 + lT) + 0.137 * (lT - l0), lT};
  AgpBasis basis = generate_basis_multi(h, probes);

  // coefficient table over the lambda grid
  const int grid_n = cfg.value("lambda_grid", 41);
  std::string alpha_csv = "lambda";
  for (std::size_t o = 0; o < basis.orbit_count(); ++o)
    alpha_csv += ",alpha_" + basis.orbit_label(o);
  alpha_csv += ",rank,residual_norm,mode\n";
  json diag = json::object();
  for (int i = 0; i < grid_n; ++i) {
    const double l = l0 + (lT - l0) * i / (grid_n - 1);
    const AgpSolution sol = solve_exact(h.operator_at(l), h.derivative_at(l), basis);
    alpha_csv += fmt(l);
    for (Eigen::Index o = 0; o < sol.alpha.size(); ++o) alpha_csv += "," + fmt(sol.alpha(o));
    alpha_csv += "," + std::to_string(sol.rank) + "," + fmt(sol.residual_norm) + "," +
                 to_string(sol.mode) + "\n";
  }
  sink.write("alpha.csv", alpha_csv);

  if (cfg.value("evolve", true) && h.n_sites() <= kEvolveSiteCap) {
    AgpField field;
    if (mode == "exact") {
      field = make_exact_cd(h, basis);
    } else if (mode == "restricted") {
      const int k = cfg.value("agp", json::object()).value("K", 0);
      std::vector<std::size_t> keep;
      for (std::size_t o = 0; o < basis.orbit_count(); ++o)
        if (basis.orbit_order(o) <= k) keep.push_back(o);
      field = make_restricted_cd(h, basis.restricted_to(keep));
    } else if (mode != "none") {
      throw std::invalid_argument("custom: unknown agp mode " + mode);
    }
    EvolveOptions opt;
    opt.n_steps = cfg.value("n_steps", 0);
    const EvolutionResult res = evolve(h, field, sched, ground_state(h.operator_at(l0)), opt);
    std::string fid = "t,lambda,p0\n";
    for (std::size_t i = 0; i < res.times.size(); ++i)
      fid += fmt(res.times[i]) + "," + fmt(sched.lambda_of_t(res.times[i])) + "," +
             fmt(res.fidelities[i]) + "\n";
    sink.write("fidelity.csv", fid);
    diag["final_fidelity"] = res.fidelities.back();
    diag["norm_drift"] = res.norm_drift;
  }
  sink.write("plot.gp",
             "set datafile separator ','\nset key autotitle columnhead\n"
             "plot 'alpha.csv' using 1:2 with lines\n");
  return diag;
}

json defaults_for(std::string_view name) {
  json d;
  d["experiment"] = std::string(name);
  d["out"] = "results";
  d["threads"] = 1;
  d["seed"] = 1;
  if (name == "single-spin-check") {
    d["samples"] = 100;
    d["T"] = 1.0;
  } else if (name == "two-spin-bound") {
    d["chi0"] = -1.0;
    d["omega0"] = -1.0;
    d["T"] = 1.0;
    d["n_panels"] = 1024;
  } else if (name == "two-spin-fidelity") {
    d["chi0"] = -1.0;
    d["omega0"] = -1.0;
    d["T_list"] = {0.05, 0.1, 0.2, 0.5, 1.0, 2.0};
    d["n_panels"] = 1024;
  } else if (name == "ising-fidelity") {
    d["L"] = 10;
    d["K_list"] = {"none", 0, 2, 8};
    d["modes"] = {"truncate", "restricted"};
    d["T_list"] = {0.05, 0.1, 0.5, 1.0};
    d["n_panels"] = 64;
    d["n_steps"] = 0;
  } else if (name == "qpt-size-scan") {
    d["g_list"] = {0.5, 0.48, 0.45};
    d["L_list"] = json::array();
    for (int l = 20; l <= 200; l += 20) d["L_list"].push_back(l);
    // the size scan uses the K-restricted construction: the exact norm grows
    // quadratically at the critical point (soft-mode tail), the restricted
    // one linearly
    d["policy"] = "fixed";
    d["K"] = 9;
  } else if (name == "qpt-restriction-scan") {
    d["g_list"] = {0.5, 0.48, 0.45};
    d["L"] = 10;
    d["K_list"] = json::array();
  } else if (name == "custom") {
    d["schedule"] = {{"kind", "annealing"}, {"T", 1.0}};
    d["agp"] = {{"mode", "exact"}};
    d["lambda_grid"] = 41;
    d["evolve"] = true;
  }
  return d;
}

bool known_experiment(std::string_view name) {
  for (const char* n : kExperimentNames)
    if (name == n) return true;
  return false;
}

}  // namespace

ExperimentConfig default_config(std::string_view experiment) {
  if (!known_experiment(experiment))
    throw std::invalid_argument("unknown experiment: " + std::string(experiment));
  ExperimentConfig config;
  config.experiment = std::string(experiment);
  const json d = defaults_for(experiment);
  config.out_dir = d.value("out", "results");
  config.threads = d.value("threads", 1);
  config.seed = d.value("seed", std::uint64_t{1});
  config.document = d.dump();
  return config;
}

ExperimentConfig load_config(const std::string& json_text,
                             std::optional<std::string> experiment_override) {
  json user;
  try {
    user = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!user.is_object()) throw std::invalid_argument("config must be a JSON object");
  std::string name;
  if (experiment_override) {
    name = *experiment_override;
  } else if (user.contains("experiment")) {
    name = user.at("experiment").get<std::string>();
  } else {
    throw std::invalid_argument("config is missing the \"experiment\" field");
  }
  if (!known_experiment(name)) throw std::invalid_argument("unknown experiment: " + name);

  json merged = defaults_for(name);
  for (const auto& [key, value] : user.items()) merged[key] = value;
  merged["experiment"] = name;

  ExperimentConfig config;
  config.experiment = name;
  config.out_dir = merged.value("out", "results");
  config.threads = merged.value("threads", 1);
  config.seed = merged.value("seed", std::uint64_t{1});
  config.document = merged.dump();
  return config;
}

std::vector<Finding> validate(const ExperimentConfig& config) {
  std::vector<Finding> findings;
  if (!known_experiment(config.experiment))
    findings.push_back({"experiment", "unknown experiment: " + config.experiment});
  if (config.threads < 1) findings.push_back({"threads", "thread count must be at least 1"});

  json cfg;
  try {
    cfg = json::parse(config.document);
  } catch (const json::exception&) {
    findings.push_back({"document", "config document is not valid JSON"});
    return findings;
  }

  const fs::path out(config.out_dir);
  const fs::path probe = out.has_parent_path() ? out.parent_path() : fs::path(".");
  std::error_code ec;
  if (fs::exists(out, ec) && !fs::is_directory(out, ec)) {
    findings.push_back({"out", "output path exists and is not a directory"});
  } else if (!fs::exists(out, ec) && !fs::exists(probe, ec)) {
    findings.push_back({"out", "parent of the output directory does not exist"});
  }

  auto check_positive = [&](const char* key) {
    if (cfg.contains(key) && cfg[key].is_number() && cfg[key].get<double>() <= 0.0)
      findings.push_back({key, std::string(key) + " must be positive"});
  };
  check_positive("T");

  if (cfg.contains("T_list"))
    for (const auto& t : cfg["T_list"])
      if (t.get<double>() <= 0.0) findings.push_back({"T_list", "operation times must be positive"});

  if (cfg.contains("n_steps") && cfg["n_steps"].is_number_integer()) {
    const int n = cfg["n_steps"].get<int>();
    if (n != 0 && n < 100) findings.push_back({"n_steps", "n_steps must be at least 100"});
  }

  const bool evolves = config.experiment == "ising-fidelity" ||
                       (config.experiment == "custom" && cfg.value("evolve", true));
  if (cfg.contains("L") && cfg["L"].is_number_integer()) {
    const int L = cfg["L"].get<int>();
    if (config.experiment == "ising-fidelity" || config.experiment == "qpt-restriction-scan" ||
        config.experiment == "qpt-size-scan") {
      if (L < 3) findings.push_back({"L", "the Ising chain needs L >= 3"});
    }
    if (evolves && L > kEvolveSiteCap)
      findings.push_back(
          {"L", "L=" + std::to_string(L) +
                    " exceeds dense-evolution cap; use qpt scans for large chains"});
    if (cfg.contains("K_list")) {
      for (const auto& k : cfg["K_list"]) {
        if (k.is_string()) continue;
        const int kv = k.get<int>();
        if (kv > L - 2)
          findings.push_back(
              {"K_list", "K=" + std::to_string(kv) +
                             " violates the restriction-order constraint (K <= L-2)"});
        if (kv < 0) findings.push_back({"K_list", "K must be non-negative"});
      }
    }
  }
  if (cfg.contains("L_list"))
    for (const auto& l : cfg["L_list"])
      if (l.get<int>() < 3) findings.push_back({"L_list", "the Ising chain needs L >= 3"});

  if (config.experiment == "custom") {
    if (!cfg.contains("system")) {
      findings.push_back({"system", "custom experiments need a \"system\" description"});
    } else {
      try {
        const ParametricHamiltonian h = system_from_json(cfg["system"]);
        if (cfg.value("evolve", true) && h.n_sites() > kEvolveSiteCap)
          findings.push_back(
              {"system", "n_sites=" + std::to_string(h.n_sites()) +
                             " exceeds dense-evolution cap; use qpt scans or disable evolve"});
      } catch (const std::exception& e) {
        findings.push_back({"system", e.what()});
      }
    }
  }
  return findings;
}

RunManifest run(const ExperimentConfig& config) {
  const auto findings = validate(config);
  if (!findings.empty()) {
    std::string message = "configuration invalid:";
    for (const auto& f : findings) message += "\n  [" + f.field + "] " + f.message;
    throw std::invalid_argument(message);
  }

  const auto start = std::chrono::steady_clock::now();
  const json cfg = json::parse(config.document);
  OutputSink sink{fs::path(config.out_dir)};

  json diagnostics;
  if (config.experiment == "single-spin-check") {
    diagnostics = run_single_spin_check(cfg, config.seed, config.threads, sink);
  } else if (config.experiment == "two-spin-bound") {
    diagnostics = run_two_spin_bound(cfg, config.threads, sink);
  } else if (config.experiment == "two-spin-fidelity") {
    diagnostics = run_two_spin_fidelity(cfg, config.threads, sink);
  } else if (config.experiment == "ising-fidelity") {
    diagnostics = run_ising_fidelity(cfg, config.threads, sink);
  } else if (config.experiment == "qpt-size-scan") {
    diagnostics = run_qpt_size_scan(cfg, config.threads, sink);
  } else if (config.experiment == "qpt-restriction-scan") {
    diagnostics = run_qpt_restriction_scan(cfg, config.threads, sink);
  } else if (config.experiment == "custom") {
    diagnostics = run_custom(cfg, config.threads, sink);
  } else {
    throw std::invalid_argument("unknown experiment: " + config.experiment);
  }

  RunManifest manifest;
  manifest.config_snapshot = config.document;
  manifest.version = std::string(kVersion);
  manifest.diagnostics = diagnostics.dump();
  manifest.files = sink.files();
  manifest.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  // manifest.json itself is written last and not self-listed
  std::ofstream out(fs::path(config.out_dir) / "manifest.json", std::ios::binary);
  out << manifest_json(manifest);
  return manifest;
}

std::string manifest_json(const RunManifest& manifest) {
  json j;
  j["config"] = json::parse(manifest.config_snapshot);
  j["version"] = manifest.version;
  j["wall_time_s"] = manifest.wall_time_s;
  j["diagnostics"] = json::parse(manifest.diagnostics);
  j["files"] = json::array();
  for (const auto& f : manifest.files)
    j["files"].push_back({{"path", f.path}, {"fnv1a64", f.fnv1a64}});
  return j.dump(2) + "\n";
}

}  // namespace agpforge
