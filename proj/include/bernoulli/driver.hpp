#pragma once

// Run configuration, bundled experiments, synthetic data generation and the
// identification loop: solve, differentiate, compute a descent velocity,
// transport the level set, repeat.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "data.hpp"
#include "fem.hpp"
#include "levelset.hpp"
#include "mesh.hpp"
#include "shapegrad.hpp"
#include "transport.hpp"
#include "velocity.hpp"
#include "velocity_space.hpp"

namespace bernoulli {

struct ShapeSpec {
  std::string preset;
  ParamMap params;
};

struct RunConfig {
  std::string name = "custom";
  int n = 100;
  SdVariant sd = SdVariant::Continuous;
  ShapeSpec truth;
  ShapeSpec init;
  std::string data = "circle_exact";
  std::string g_d = "analytic";  // analytic | synthetic
  int data_n = 500;
  std::string data_table;         // cache file for synthetic g_D
  FemParams fem;
  VelocityParams velocity;
  TransportParams transport;      // T is computed per iteration
  double r = 0.5;                 // learning rate
  double tol = 1e-5;
  int max_iter = 200;
  std::string out;                // empty: no files
  int stride = 0;                 // snapshot stride; 0: first and last only
  bool record_time = true;
  double fd_t = 1e-5;
  int fd_fields = 5;
  unsigned long long seed = 1;
};

inline void validate(const RunConfig& c) {
  if (c.n < 2) throw Error("config: n must be at least 2");
  if (!(c.tol > 0.0)) throw Error("config: tol must be positive");
  if (!(c.r > 0.0) || !(c.r < 1.0)) throw Error("config: r must lie in (0, 1)");
  if (c.max_iter < 0) throw Error("config: max_iter must be non-negative");
  if (!(c.fem.beta > 0.0) || !(c.fem.gamma >= 0.0)) throw Error("config: beta must be positive, gamma non-negative");
  if (!(c.velocity.beta1 > 0.0) || !(c.velocity.beta2 > 0.0) || !(c.velocity.gamma > 0.0))
    throw Error("config: velocity penalties must be positive");
  if (c.transport.steps < 1 || !(c.transport.gamma2 >= 0.0)) throw Error("config: invalid transport parameters");
  if (c.init.preset.empty()) throw Error("config: no initial level set given");
  if (c.g_d == "synthetic" && c.truth.preset.empty()) throw Error("config: synthetic data need a truth level set");
  if (c.g_d != "analytic" && c.g_d != "synthetic") throw Error("config: g_d must be 'analytic' or 'synthetic'");
  if (c.stride < 0) throw Error("config: stride must be non-negative");
}

/// Bundled experiments.
inline RunConfig experiment_preset(const std::string& name) {
  RunConfig c;
  c.name = name;
  const ParamMap true_circle{{"cx", 0.5}, {"cy", 0.5}, {"r", 0.25}};
  const ParamMap true_lame{{"cx", 0.5}, {"cy", 0.5}, {"a", 81.0}, {"b", 1296.0}, {"p", 4.0}};
  if (name == "circle_small_init") {
    c.truth = {"circle", true_circle};
    c.init = {"circle", {{"cx", 0.5}, {"cy", 0.5}, {"r", 0.125}}};
    c.data = "circle_exact";
    c.tol = 1e-5;
    c.max_iter = 200;
    c.r = 0.9;
  } else if (name == "circle_ellipse_init") {
    c.truth = {"circle", true_circle};
    c.init = {"ellipse", {{"cx", 0.5}, {"cy", 0.5}, {"a", 64.0 / 9.0}, {"b", 64.0}}};
    c.data = "circle_exact";
    c.tol = 1e-5;
    c.max_iter = 400;
    c.r = 0.9;
  } else if (name == "ellipse_circle_init") {
    c.truth = {"ellipse", {{"cx", 0.5}, {"cy", 0.5}, {"a", 16.0}, {"b", 64.0}}};
    c.init = {"circle", {{"cx", 0.6}, {"cy", 0.4}, {"r", 1.0 / 6.0}}};
    c.data = "ellipse_trig";
    c.g_d = "synthetic";
    c.tol = 1e-5;
    c.max_iter = 400;
    c.r = 0.9;
  } else if (name == "lame_circle_init") {
    c.truth = {"lame", true_lame};
    c.init = {"circle", {{"cx", 0.5}, {"cy", 0.5}, {"r", 0.125}}};
    c.data = "lame_polar";
    c.g_d = "synthetic";
    c.tol = 5e-6;
    c.max_iter = 200;
  } else if (name == "merge_two_lame") {
    c.truth = {"lame", true_lame};
    c.init = {"two_lame",
              {{"cx1", 0.32}, {"cy1", 0.5}, {"cx2", 0.68}, {"cy2", 0.5}, {"a", 1296.0}, {"b", 1296.0}, {"p", 4.0}}};
    c.data = "lame_polar";
    c.g_d = "synthetic";
    c.tol = 5e-6;
    c.max_iter = 400;
  } else if (name == "split_cassini") {
    c.truth = {"two_circles",
               {{"cx1", 0.2}, {"cy1", 0.5}, {"r1", 0.15}, {"cx2", 0.8}, {"cy2", 0.5}, {"r2", 0.15}}};
    c.init = {"cassini", {{"cx", 0.5}, {"cy", 0.5}, {"scale", 3.0}, {"b", 1.001}}};
    c.data = "radial_linear";
    c.g_d = "synthetic";
    c.tol = 1e-8;
    c.max_iter = 300;
    c.r = 0.9;
  } else {
    throw Error("unknown experiment preset '" + name + "'");
  }
  return c;
}

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"circle_small_init", "circle_ellipse_init", "ellipse_circle_init",
                                              "lame_circle_init",  "merge_two_lame",      "split_cassini"};
  return names;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  is.imbue(std::locale::classic());
  double x = 0.0;
  if (!(is >> x) || !(is >> std::ws).eof()) throw Error("config: '" + key + "' expects a number, got '" + v + "'");
  return x;
}

inline int to_int(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw Error("config: '" + key + "' expects an integer, got '" + v + "'");
  return static_cast<int>(x);
}

/// Shortest text that reads back to the same double.
inline std::string num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw Error("config: '" + key + "' expects a boolean, got '" + v + "'");
}

}  // namespace detail

/// Sets one key. Shape parameters use dotted keys: `truth.r = 0.25`,
/// `init.cx = 0.5`; setting `truth` or `init` clears their parameters.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "preset") {
    const RunConfig p = experiment_preset(value);
    const std::string out = c.out;
    c = p;
    c.out = out;
  } else if (key == "name") c.name = value;
  else if (key == "n") c.n = to_int(key, value);
  else if (key == "sd") c.sd = parse_sd_variant(value);
  else if (key == "truth") c.truth = {value, {}};
  else if (key == "init") c.init = {value, {}};
  else if (key.rfind("truth.", 0) == 0) c.truth.params[key.substr(6)] = to_double(key, value);
  else if (key.rfind("init.", 0) == 0) c.init.params[key.substr(5)] = to_double(key, value);
  else if (key == "data") c.data = value;
  else if (key == "g_d") c.g_d = value;
  else if (key == "data_n") c.data_n = to_int(key, value);
  else if (key == "data_table") c.data_table = value;
  else if (key == "gamma") c.fem.gamma = to_double(key, value);
  else if (key == "beta") c.fem.beta = to_double(key, value);
  else if (key == "ghost_mode") {
    if (value == "all") c.fem.ghost_mode = GhostMode::AllInterior;
    else if (value == "interface") c.fem.ghost_mode = GhostMode::InterfaceZone;
    else throw Error("config: ghost_mode must be 'all' or 'interface'");
  }
  else if (key == "quad_order") c.fem.quad_order = to_int(key, value);
  else if (key == "data_order") c.fem.data_order = to_int(key, value);
  else if (key == "beta1") c.velocity.beta1 = to_double(key, value);
  else if (key == "beta2") c.velocity.beta2 = to_double(key, value);
  else if (key == "gamma_v") c.velocity.gamma = to_double(key, value);
  else if (key == "velocity_mass") c.velocity.mass = to_bool(key, value);
  else if (key == "gamma2") c.transport.gamma2 = to_double(key, value);
  else if (key == "substeps") c.transport.steps = to_int(key, value);
  else if (key == "r") c.r = to_double(key, value);
  else if (key == "tol") c.tol = to_double(key, value);
  else if (key == "max_iter") c.max_iter = to_int(key, value);
  else if (key == "out") c.out = value;
  else if (key == "stride") c.stride = to_int(key, value);
  else if (key == "record_time") c.record_time = to_bool(key, value);
  else if (key == "fd_t") c.fd_t = to_double(key, value);
  else if (key == "fd_fields") c.fd_fields = to_int(key, value);
  else if (key == "seed") c.seed = static_cast<unsigned long long>(to_int(key, value));
  else throw Error("config: unknown key '" + key + "'");
}

/// key = value lines; '#' starts a comment. A `preset` line is applied
/// before every other key regardless of its position.
inline RunConfig parse_config(const std::string& text, const std::string& origin = "config") {
  std::vector<std::pair<std::string, std::string>> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    kv.emplace_back(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  RunConfig c;
  std::stable_partition(kv.begin(), kv.end(), [](const auto& p) { return p.first == "preset"; });
  for (const auto& [k, v] : kv) apply_setting(c, k, v);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  RunConfig c = parse_config(ss.str(), path);
  // relative data paths are taken relative to the config file
  if (!c.data_table.empty() && std::filesystem::path(c.data_table).is_relative())
    c.data_table = (std::filesystem::path(path).parent_path() / c.data_table).string();
  return c;
}

inline std::string format_config(const RunConfig& c) {
  using detail::num;
  std::ostringstream os;
  os << "name = " << c.name << "\nn = " << c.n << "\nsd = " << to_string(c.sd) << '\n';
  for (const auto* s : {&c.truth, &c.init}) {
    const char* k = s == &c.truth ? "truth" : "init";
    if (s->preset.empty()) continue;
    os << k << " = " << s->preset << '\n';
    for (const auto& [pk, pv] : s->params) os << k << '.' << pk << " = " << num(pv) << '\n';
  }
  os << "data = " << c.data << "\ng_d = " << c.g_d << "\ndata_n = " << c.data_n << '\n';
  if (!c.data_table.empty()) os << "data_table = " << c.data_table << '\n';
  os << "gamma = " << num(c.fem.gamma) << "\nbeta = " << num(c.fem.beta)
     << "\nghost_mode = " << (c.fem.ghost_mode == GhostMode::AllInterior ? "all" : "interface")
     << "\nquad_order = " << c.fem.quad_order << "\ndata_order = " << c.fem.data_order
     << "\nbeta1 = " << num(c.velocity.beta1) << "\nbeta2 = " << num(c.velocity.beta2)
     << "\ngamma_v = " << num(c.velocity.gamma) << "\nvelocity_mass = " << (c.velocity.mass ? 1 : 0)
     << "\ngamma2 = " << num(c.transport.gamma2) << "\nsubsteps = " << c.transport.steps << "\nr = " << num(c.r)
     << "\ntol = " << num(c.tol) << "\nmax_iter = " << c.max_iter << "\nstride = " << c.stride
     << "\nrecord_time = " << (c.record_time ? 1 : 0) << '\n';
  return os.str();
}

inline LevelSetField make_levelset(const ShapeSpec& s, std::shared_ptr<const BackgroundMesh> mesh) {
  return preset_levelset(s.preset, s.params, std::move(mesh));
}

/// Solves the forward problem with the true interface on an n_fine mesh and
/// tabulates u_h at the outer boundary nodes by arclength.
inline BoundaryTable generate_synthetic_data(const ShapeSpec& truth, const ProblemData& data, int n_fine,
                                             const FemParams& prm) {
  auto mesh = std::make_shared<const BackgroundMesh>(build_uniform_mesh(n_fine));
  const LevelSetField phi = make_levelset(truth, mesh);
  for (int v = 0; v < mesh->num_nodes(); ++v)
    if (mesh->is_boundary_node(v) && phi.values[static_cast<std::size_t>(v)] >= 0.0)
      throw Error("generate_synthetic_data: true interface touches the outer boundary");
  const Discretization d = discretize(mesh, phi.values, prm);
  const FEFunction u = solve_primal(d, data, prm);
  std::vector<std::pair<double, double>> rows;
  for (int v = 0; v < mesh->num_nodes(); ++v) {
    if (!mesh->is_boundary_node(v)) continue;
    rows.emplace_back(boundary_arclength(mesh->nodes[v]), u.coeffs[d.dofs->dof(v)]);
  }
  std::sort(rows.begin(), rows.end());
  BoundaryTable t;
  for (const auto& [s, val] : rows) {
    t.arclength.push_back(s);
    t.values.push_back(val);
  }
  return t;
}

/// Data preset with g_D attached according to the configuration.
inline ProblemData prepare_data(const RunConfig& c) {
  ProblemData d = data_preset(c.data);
  if (c.g_d == "analytic") {
    if (!d.g_dirichlet) throw Error("data preset '" + c.data + "' has no analytic g_D; use g_d = synthetic");
    return d;
  }
  BoundaryTable t;
  if (!c.data_table.empty() && std::filesystem::exists(c.data_table)) {
    t = read_boundary_table(c.data_table);
  } else {
    t = generate_synthetic_data(c.truth, d, c.data_n, c.fem);
    if (!c.data_table.empty()) {
      const auto parent = std::filesystem::path(c.data_table).parent_path();
      if (!parent.empty()) std::filesystem::create_directories(parent);
      write_boundary_table(t, c.data_table);
    }
  }
  attach_table(d, std::move(t));
  return d;
}

enum class ExitStatus { Tolerance, MaxIter, Error };

inline std::string to_string(ExitStatus s) {
  switch (s) {
    case ExitStatus::Tolerance: return "tolerance";
    case ExitStatus::MaxIter: return "max_iter";
    case ExitStatus::Error: return "error";
  }
  return "?";
}

struct IterationRecord {
  int k = 0;
  double J = 0.0;
  double beta_h1 = 0.0;  // 0 when no velocity was computed
  double T = 0.0;
  double seconds = 0.0;
  double descent = 0.0;  // sd(beta_h), negative for a descent direction
  int components = 0;    // closed components of the zero isoline
};

struct RunTrace {
  std::vector<IterationRecord> rows;
  ExitStatus status = ExitStatus::Error;
  std::string message;
  LevelSetField initial;
  LevelSetField final_levelset;
};

/// Writes residuals.csv, level-set snapshots and isolines as a run proceeds.
class OutputWriter {
 public:
  OutputWriter(std::filesystem::path dir, int stride) : dir_(std::move(dir)), stride_(stride) {
    std::filesystem::create_directories(dir_);
    csv_.open(dir_ / "residuals.csv");
    if (!csv_) throw Error("cannot write '" + (dir_ / "residuals.csv").string() + "'");
    csv_.imbue(std::locale::classic());
    csv_ << std::setprecision(17) << "iter,J,beta_h1,T,seconds\n" << std::flush;
  }

  void row(const IterationRecord& r) {
    csv_ << r.k << ',' << r.J << ',' << r.beta_h1 << ',' << r.T << ',' << r.seconds << '\n' << std::flush;
    if (!csv_) throw Error("I/O error writing '" + (dir_ / "residuals.csv").string() + "'");
  }

  bool wants_snapshot(int k) const { return k == 0 || (stride_ > 0 && k % stride_ == 0); }

  void snapshot(int k, const LevelSetField& phi) const {
    write_levelset((dir_ / ("levelset_" + std::to_string(k) + ".txt")).string(), phi, k);
    write_isoline((dir_ / ("isoline_" + std::to_string(k) + ".txt")).string(), extract_isoline(phi));
  }

  static void write_levelset(const std::string& path, const LevelSetField& phi, int k) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write '" + path + "'");
    os.imbue(std::locale::classic());
    os << "levelset n=" << phi.mesh->n << " iter=" << k << '\n' << std::setprecision(17);
    for (double v : phi.values) os << v << '\n';
    if (!os) throw Error("I/O error writing '" + path + "'");
  }

  static void write_isoline(const std::string& path, const std::vector<Polyline>& chains) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write '" + path + "'");
    os.imbue(std::locale::classic());
    os << std::setprecision(17);
    for (std::size_t c = 0; c < chains.size(); ++c) {
      if (c > 0) os << '\n';
      for (const Vec2& p : chains[c]) os << p.x() << ' ' << p.y() << '\n';
    }
    if (!os) throw Error("I/O error writing '" + path + "'");
  }

 private:
  std::filesystem::path dir_;
  int stride_;
  std::ofstream csv_;
};

/// Called after every logged iteration; may be empty.
using IterationObserver = std::function<void(const IterationRecord&, const LevelSetField&)>;

inline RunTrace run_identification(const RunConfig& c, const ProblemData& data,
                                   const IterationObserver& observe = {}) {
  validate(c);
  if (!data.g_dirichlet) throw Error("run_identification: g_D is not available");
  auto mesh = std::make_shared<const BackgroundMesh>(build_uniform_mesh(c.n));
  RunTrace trace;
  trace.initial = make_levelset(c.init, mesh);
  LevelSetField phi = trace.initial;

  std::unique_ptr<OutputWriter> out;
  if (!c.out.empty()) {
    out = std::make_unique<OutputWriter>(c.out, c.stride);
    std::ofstream(std::filesystem::path(c.out) / "config.txt") << format_config(c);
  }

  int k = 0;
  std::string stage = "setup";
  try {
    for (;; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      IterationRecord rec;
      rec.k = k;
      stage = "isoline";
      rec.components = static_cast<int>(extract_isoline(phi).size());
      stage = "forward solve";
      const ForwardSolution fwd = solve_forward(mesh, phi.values, data, c.fem);
      if (!std::isfinite(fwd.J)) throw Error("cost is not finite");
      rec.J = fwd.J;
      const bool converged = fwd.J <= c.tol;
      const bool exhausted = k >= c.max_iter;
      if (out && (out->wants_snapshot(k) || converged || exhausted)) {
        stage = "output";
        out->snapshot(k, phi);
      }
      if (!converged && !exhausted) {
        stage = "shape derivative";
        const DoubledVelocitySpace space = make_velocity_space(*mesh, fwd.disc.decomp.classes);
        const SDFunctional sd = assemble_sd(c.sd, fwd, data, space, c.fem);
        stage = "velocity";
        const CsrMatrix b = assemble_velocity_system(fwd.disc, space, c.velocity);
        const VelocityField beta = solve_velocity(fwd.disc, space, b, sd);
        rec.beta_h1 = beta.h1_norm;
        rec.descent = evaluate_sd(sd, beta.coeffs);
        if (!(rec.descent < 0.0)) {
          std::ostringstream os;
          os << "velocity is not a descent direction (sd(beta) = " << rec.descent << ")";
          throw Error(os.str());
        }
        rec.T = c.r * fwd.J / beta.h1_norm;
        stage = "transport";
        TransportParams tp = c.transport;
        tp.T = rec.T;
        phi = advect(phi, normalize(beta).nodal(), tp);
      }
      if (c.record_time)
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      trace.rows.push_back(rec);
      stage = "output";
      if (out) out->row(rec);
      if (observe) observe(rec, phi);
      if (converged || exhausted) {
        trace.status = converged ? ExitStatus::Tolerance : ExitStatus::MaxIter;
        break;
      }
    }
  } catch (const std::exception& e) {
    trace.status = ExitStatus::Error;
    trace.message = "iteration " + std::to_string(k) + ", stage " + stage + ": " + e.what();
  }
  trace.final_levelset = phi;
  return trace;
}

/// Symmetric Hausdorff distance between two sets of polylines, measured from
/// every vertex of one set to the segments of the other.
inline double hausdorff_distance(const std::vector<Polyline>& a, const std::vector<Polyline>& b) {
  auto point_to_set = [](const Vec2& p, const std::vector<Polyline>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (const Polyline& l : set)
      for (std::size_t i = 0; i + 1 < l.size(); ++i) {
        const Vec2 d = l[i + 1] - l[i];
        const double len2 = d.squaredNorm();
        const double s = len2 > 0.0 ? std::clamp((p - l[i]).dot(d) / len2, 0.0, 1.0) : 0.0;
        best = std::min(best, (p - (l[i] + s * d)).norm());
      }
    return best;
  };
  auto directed = [&](const std::vector<Polyline>& x, const std::vector<Polyline>& y) {
    double worst = 0.0;
    for (const Polyline& l : x)
      for (const Vec2& p : l) worst = std::max(worst, point_to_set(p, y));
    return worst;
  };
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  return std::max(directed(a, b), directed(b, a));
}

/// Area-weighted centroid of a closed polyline.
inline Vec2 polyline_centroid(const Polyline& l) {
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i + 1 < l.size(); ++i) {
    const double w = cross2(l[i], l[i + 1]);
    a += w;
    c += w * (l[i] + l[i + 1]);
  }
  return c / (3.0 * a);
}

}  // namespace bernoulli
