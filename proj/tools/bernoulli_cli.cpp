// Command-line front end: identify, gen-data, check-sd, presets.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <bernoulli/driver.hpp>

using namespace bernoulli;

namespace {

struct Overrides {
  std::string sd, preset, out;
  std::optional<double> tol;
  std::optional<int> max_iter;
  std::vector<std::string> set;  // raw key=value pairs
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--sd", o.sd, "shape derivative: continuous | discrete | boundary");
  cmd->add_option("--preset", o.preset, "bundled experiment (replaces the config's preset)");
  cmd->add_option("--tol", o.tol, "stopping tolerance on J");
  cmd->add_option("--max-iter", o.max_iter, "maximum number of iterations");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--set", o.set, "extra key=value setting (repeatable)");
}

RunConfig resolve(const std::string& path, const Overrides& o) {
  RunConfig c = path.empty() ? RunConfig{} : load_config(path);
  if (!o.preset.empty()) apply_setting(c, "preset", o.preset);
  for (const std::string& kv : o.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!o.sd.empty()) c.sd = parse_sd_variant(o.sd);
  if (o.tol) c.tol = *o.tol;
  if (o.max_iter) c.max_iter = *o.max_iter;
  if (!o.out.empty()) c.out = o.out;
  return c;
}

int identify(const RunConfig& c, bool quiet) {
  const ProblemData data = prepare_data(c);
  const RunTrace trace = run_identification(c, data, [quiet](const IterationRecord& r, const LevelSetField&) {
    if (!quiet) std::printf("iter %4d  J = %.6e  |beta| = %.4e  T = %.4e\n", r.k, r.J, r.beta_h1, r.T);
  });
  std::printf("exit: %s after %zu evaluations, final J = %.6e\n", to_string(trace.status).c_str(), trace.rows.size(),
              trace.rows.empty() ? 0.0 : trace.rows.back().J);
  if (trace.status == ExitStatus::Error) {
    std::fprintf(stderr, "error: %s\n", trace.message.c_str());
    return 2;
  }
  return 0;
}

int gen_data(RunConfig c) {
  if (c.truth.preset.empty()) throw Error("gen-data: config has no truth level set");
  std::string path = c.data_table;
  if (path.empty()) {
    if (c.out.empty()) throw Error("gen-data: set data_table or --out");
    path = (std::filesystem::path(c.out) / "g_d.txt").string();
  }
  const ProblemData d = data_preset(c.data);
  const BoundaryTable t = generate_synthetic_data(c.truth, d, c.data_n, c.fem);
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  write_boundary_table(t, path);
  std::printf("wrote %zu boundary values to %s\n", t.arclength.size(), path.c_str());
  return 0;
}

int check_sd(const RunConfig& c, double t) {
  const ProblemData data = prepare_data(c);
  auto mesh = std::make_shared<const BackgroundMesh>(build_uniform_mesh(c.n));
  const LevelSetField phi = make_levelset(c.init, mesh);
  const ForwardSolution fwd = solve_forward(mesh, phi.values, data, c.fem);
  const DoubledVelocitySpace space = make_velocity_space(*mesh, fwd.disc.decomp.classes);
  std::printf("J = %.6e on the initial geometry (n = %d, t = %.1e)\n", fwd.J, c.n, t);
  std::printf("%-11s %8s %22s %22s %12s\n", "variant", "theta_id", "assembled", "fd", "rel_err");
  int failures = 0;
  for (SdVariant v : {SdVariant::Discrete, SdVariant::BoundaryCorrection, SdVariant::Continuous}) {
    const SDFunctional sd = assemble_sd(v, fwd, data, space, c.fem);
    std::mt19937_64 rng(c.seed);
    std::vector<FdComparison> rows;
    for (int k = 0; k < c.fd_fields; ++k) {
      const auto theta = random_smooth_theta(*mesh, rng);
      rows.push_back(compare_with_fd(fwd, sd, space, theta, t, data, c.fem, k));
      const FdComparison& r = rows.back();
      std::printf("%-11s %8d %22.14e %22.14e %12.3e\n", to_string(v).c_str(), k, r.assembled, r.fd, r.rel_err);
      if (v != SdVariant::Continuous && !(r.rel_err <= 1e-3)) ++failures;
    }
    if (!c.out.empty()) {
      std::filesystem::create_directories(c.out);
      write_fd_table((std::filesystem::path(c.out) / ("fd_" + to_string(v) + ".csv")).string(), rows);
    }
  }
  std::printf("%s\n", failures == 0 ? "discrete and boundary derivatives agree with finite differences"
                                    : "finite-difference check FAILED");
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Level-set identification of an interior Bernoulli free boundary with CutFEM"};
  app.require_subcommand(1);

  std::string config;
  Overrides o;
  bool quiet = false;
  auto* id = app.add_subcommand("identify", "run the identification loop");
  id->add_option("--config", config, "key=value configuration file");
  id->add_flag("--quiet", quiet, "print only the final status");
  add_overrides(id, o);

  auto* gen = app.add_subcommand("gen-data", "tabulate synthetic Dirichlet data from the true interface");
  gen->add_option("--config", config, "key=value configuration file");
  add_overrides(gen, o);

  double t = 1e-5;
  auto* chk = app.add_subcommand("check-sd", "compare assembled shape derivatives with finite differences");
  chk->add_option("--config", config, "key=value configuration file");
  chk->add_option("--t", t, "finite-difference step");
  add_overrides(chk, o);

  auto* list = app.add_subcommand("presets", "list bundled experiments");
  bool show = false;
  list->add_flag("--show", show, "print the full configuration of each preset");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*list) {
      for (const std::string& n : experiment_names()) {
        if (show) std::printf("# %s\n%s\n", n.c_str(), format_config(experiment_preset(n)).c_str());
        else std::printf("%s\n", n.c_str());
      }
      return 0;
    }
    if (config.empty() && o.preset.empty()) throw Error("give --config or --preset");
    const RunConfig c = resolve(config, o);
    if (*id) return identify(c, quiet);
    if (*gen) return gen_data(c);
    if (*chk) return check_sd(c, t);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
