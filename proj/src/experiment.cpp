#include "grpolab/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grpolab/analysis.hpp"
#include "grpolab/parallel.hpp"
#include "grpolab/stats.hpp"
#include "grpolab/ustat.hpp"
#include "json.hpp"

namespace grpolab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

const std::vector<std::string> kCommands = {"mse-sweep",  "decompose",   "train",
                                            "grpo-train", "scaling-law", "group-sweep",
                                            "asymptotics", "bias-curve", "arcsin-check"};

json load_spec_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("spec: cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("spec: invalid JSON: ") + e.what());
  }
  return j;
}

// --- schema checking ----------------------------------------------------

void check_schema(const json& spec, std::vector<std::string>& diags) {
  if (!spec.is_object()) {
    diags.push_back("spec must be a JSON object");
    return;
  }
  if (!spec.contains("command") || !spec["command"].is_string()) {
    diags.push_back("missing string field 'command'");
  } else {
    const std::string cmd = spec["command"];
    bool known = false;
    for (const auto& c : kCommands) known = known || c == cmd;
    if (!known) diags.push_back("unknown command '" + cmd + "'");
  }
  if (!spec.contains("seed") || !spec["seed"].is_number_unsigned())
    diags.push_back("missing unsigned field 'seed' (wall-clock seeding is not supported)");

  const std::string cmd = spec.value("command", "");
  const bool needs_env = cmd != "asymptotics";
  if (needs_env && !spec.contains("env"))
    diags.push_back("missing field 'env' (inline object or path)");
  if (needs_env && spec.contains("env")) {
    try {
      if (spec["env"].is_string()) {
        load_env_spec(spec["env"].get<std::string>());
      } else {
        Environment::build(env_spec_from_json_text(spec["env"].dump()));
      }
    } catch (const std::exception& e) {
      diags.push_back(std::string("env: ") + e.what());
    }
  }

  const json params = spec.value("params", json::object());
  if (cmd == "mse-sweep") {
    if (!params.contains("G_list")) diags.push_back("mse-sweep: missing params.G_list");
    if (params.value("reps", 0) > 0 && params.value("reps", 0) < 100)
      diags.push_back("mse-sweep: reps must be >= 100");
    for (const auto& e : params.value("estimators", json::array())) {
      const std::string name = e.get<std::string>();
      if (name != "vanilla" && name != "leave_one_out" && name != "oracle_value")
        diags.push_back("mse-sweep: unknown estimator '" + name + "'");
      if (name == "leave_one_out")
        for (const auto& g : params.value("G_list", json::array()))
          if (g.get<int>() < 2)
            diags.push_back("mse-sweep: leave_one_out requires G >= 2 (got G=" +
                            std::to_string(g.get<int>()) + ")");
    }
  } else if (cmd == "decompose") {
    if (params.value("G", 2) < 2) diags.push_back("decompose: G must be >= 2");
  } else if (cmd == "train" || cmd == "grpo-train") {
    if (params.value("G", 2) < 1) diags.push_back("train: G must be >= 1");
    const std::string baseline = params.value("baseline", "leave_one_out");
    if (baseline == "leave_one_out" && params.value("G", 2) < 2)
      diags.push_back("train: leave_one_out baseline requires G >= 2");
    if (cmd == "grpo-train") {
      const int b = params.value("B", 1);
      const int m = params.value("m", 1);
      if (m < 1 || b % m != 0) diags.push_back("grpo-train: m must divide B");
      if (params.value("G", 2) < 2) diags.push_back("grpo-train: G must be >= 2");
    }
    const json sched = params.value("schedule", json::object());
    const std::string kind = sched.value("kind", "constant");
    if (kind != "constant" && kind != "inverse_iter")
      diags.push_back("train: schedule.kind must be constant or inverse_iter");
    if (sched.value("beta", 0.1) <= 0.0) diags.push_back("train: schedule.beta must be positive");
  } else if (cmd == "scaling-law") {
    if (!params.contains("budget")) diags.push_back("scaling-law: missing params.budget");
    const int n = params.value("budget", 0);
    for (const auto& g : params.value("grid", json::array()))
      if (n > 0 && n % g.get<int>() != 0)
        diags.push_back("scaling-law: grid G=" + std::to_string(g.get<int>()) +
                        " does not divide the budget");
  } else if (cmd == "group-sweep") {
    const int n = params.value("budget", 0);
    if (n <= 0) diags.push_back("group-sweep: missing positive params.budget");
    for (const auto& g : params.value("G_list", json::array()))
      if (n > 0 && n % g.get<int>() != 0)
        diags.push_back("group-sweep: G=" + std::to_string(g.get<int>()) +
                        " does not divide N=" + std::to_string(n));
  } else if (cmd == "asymptotics") {
    if (!params.contains("quadratic")) diags.push_back("asymptotics: missing params.quadratic");
  } else if (cmd == "bias-curve") {
    if (!params.contains("displacements"))
      diags.push_back("bias-curve: missing params.displacements");
    if (params.value("G", 2) < 2) diags.push_back("bias-curve: G must be >= 2");
  } else if (cmd == "arcsin-check") {
    if (params.value("G", 64) < 2) diags.push_back("arcsin-check: G must be >= 2");
  }
}

// --- shared builders ------------------------------------------------------

Environment build_env(const json& spec) {
  if (spec["env"].is_string()) return Environment::build(load_env_spec(spec["env"]));
  return Environment::build(env_spec_from_json_text(spec["env"].dump()));
}

PolicyParams build_policy(const json& spec, const Environment& env,
                          std::shared_ptr<const PolicyShape> shape, std::uint64_t seed) {
  const json init = spec.value("policy_init", json{{"kind", "zeros"}});
  const std::string kind = init.value("kind", "zeros");
  if (kind == "zeros") return PolicyParams::zeros(shape);
  if (kind == "uniform") {
    Rng rng(seed, 0x706f6c69637930ULL + init.value("stream", std::uint64_t{0}));
    return PolicyParams::random_init(shape, init.value("scale", 0.5), rng);
  }
  if (kind == "csv") return load_policy_csv(shape, env, init.at("path").get<std::string>());
  throw ValidationError("policy_init.kind must be zeros, uniform or csv");
}

SyntheticQuadratic build_quadratic(const json& q) {
  SyntheticQuadratic quad;
  auto parse_matrix = [&](const json& spec, int dim) -> Mat {
    if (spec.is_object() && spec.contains("diag")) {
      const auto diag = spec["diag"].get<std::vector<double>>();
      Mat m = Mat::Zero(static_cast<Eigen::Index>(diag.size()),
                        static_cast<Eigen::Index>(diag.size()));
      for (std::size_t i = 0; i < diag.size(); ++i)
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diag[i];
      return m;
    }
    if (spec.is_object() && spec.contains("scaled_identity")) {
      return spec["scaled_identity"].get<double>() * Mat::Identity(dim, dim);
    }
    if (spec.is_array()) {
      std::vector<std::vector<double>> rows;
      for (const auto& r : spec) rows.push_back(r.get<std::vector<double>>());
      return to_mat(rows);
    }
    throw ValidationError("quadratic: matrix must be {diag:[..]}, {scaled_identity:x} or rows");
  };
  quad.m = parse_matrix(q.at("m"), 0);
  const int dim = static_cast<int>(quad.m.rows());
  quad.theta_star = q.contains("theta_star")
                        ? to_vec(q["theta_star"].get<std::vector<double>>())
                        : Vec::Zero(dim);
  quad.gamma = q.contains("gamma") ? parse_matrix(q["gamma"], dim) : Mat::Zero(dim, dim);
  quad.validate();
  return quad;
}

TrainConfig build_train_config(const json& params, std::uint64_t seed, bool practical) {
  TrainConfig c;
  c.B = params.value("B", 1);
  c.G = params.value("G", 2);
  c.n = params.value("n", 100);
  const json sched = params.value("schedule", json::object());
  c.schedule.kind = sched.value("kind", "constant") == std::string("constant")
                        ? LrSchedule::Kind::kConstant
                        : LrSchedule::Kind::kInverseIter;
  c.schedule.beta = sched.value("beta", 0.1);
  const std::string baseline = params.value("baseline", "leave_one_out");
  if (baseline == "vanilla") c.baseline = BaselineKind::vanilla();
  else if (baseline == "leave_one_out") c.baseline = BaselineKind::leave_one_out();
  else if (baseline == "oracle_value") c.baseline = BaselineKind::oracle_value();
  else throw ValidationError("train: unknown baseline '" + baseline + "'");
  c.seed = seed;
  c.box_radius = params.value("box_radius", 30.0);
  c.record_stride = params.value("record_stride", 1);
  c.snapshot_stride = params.value("snapshot_stride", 0);
  if (practical) {
    PracticalConfig pc;
    pc.kappa = params.value("kappa", 0.0);
    pc.m = params.value("m", 1);
    pc.coverage_floor = params.value("coverage_floor", 1e-9);
    c.practical = pc;
  }
  return c;
}

// --- output helpers -------------------------------------------------------

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

struct Csv {
  std::ostringstream buf;
  explicit Csv(const std::string& header) {
    buf.precision(17);
    buf << header << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... vals) {
    bool first = true;
    ((buf << (first ? "" : ","), buf << vals, first = false), ...);
    buf << '\n';
  }
  std::string str() const { return buf.str(); }
};

std::string now_stamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%S", &tm);
  return buf;
}

fs::path fresh_out_dir(const std::string& base, const std::string& command,
                       std::uint64_t seed) {
  const std::string stem = command + "-" + now_stamp() + "-seed" + std::to_string(seed);
  fs::path dir = fs::path(base) / stem;
  int suffix = 0;
  while (fs::exists(dir)) dir = fs::path(base) / (stem + "-" + std::to_string(++suffix));
  fs::create_directories(dir);
  return dir;
}

// --- per-command runners ----------------------------------------------------

struct RunContext {
  json spec;
  std::uint64_t seed = 0;
  fs::path out;
  bool want_csv = true;
  bool want_json = true;
  json results;  // attached to the manifest
  std::ostringstream summary;
};

void run_mse_sweep(RunContext& ctx, const Environment& env, const PolicyParams& init) {
  const json params = ctx.spec.value("params", json::object());
  const int B = params.value("B", 1);
  const int reps = params.value("reps", 1000);
  const bool exact = params.value("exact", true);
  std::vector<std::string> estimators =
      params.value("estimators", std::vector<std::string>{"vanilla", "leave_one_out", "oracle_value"});
  const std::vector<int> g_list = params.at("G_list").get<std::vector<int>>();

  Csv csv("estimator,G,B,reps,mse_mean,ci_lo,ci_hi,exact_mse");
  json rows = json::array();
  std::uint64_t job = 0;
  for (const auto& name : estimators) {
    BaselineKind kind = name == "vanilla"        ? BaselineKind::vanilla()
                        : name == "leave_one_out" ? BaselineKind::leave_one_out()
                                                   : BaselineKind::oracle_value();
    for (int g : g_list) {
      const MseReport r =
          mse_monte_carlo(init, env, kind, B, g, reps, Rng::mix(ctx.seed, ++job), exact);
      csv.row(r.estimator, r.G, r.B, r.replications, r.mse_mean, r.mse_mean - r.ci_halfwidth,
              r.mse_mean + r.ci_halfwidth, r.exact_mse ? *r.exact_mse : std::nan(""));
      rows.push_back({{"estimator", r.estimator},
                      {"G", r.G},
                      {"B", r.B},
                      {"reps", r.replications},
                      {"mse_mean", r.mse_mean},
                      {"ci_halfwidth", r.ci_halfwidth},
                      {"exact_mse", r.exact_mse ? json(*r.exact_mse) : json()}});
      ctx.summary << r.estimator << " G=" << r.G << ": mse " << r.mse_mean << " +- "
                  << r.ci_halfwidth << "\n";
    }
  }
  if (ctx.want_csv) write_text(ctx.out / "mse_sweep.csv", csv.str());
  ctx.results["rows"] = rows;
}

void run_decompose(RunContext& ctx, const Environment& env, const PolicyParams& init) {
  const json params = ctx.spec.value("params", json::object());
  const int G = params.value("G", 8);
  const int groups = params.value("groups", 16);
  Rng rng(ctx.seed, 1);
  Csv csv("group,prompt_id,h0_sq,first_sq,second_sq,residual");
  json rows = json::array();
  for (int k = 0; k < groups; ++k) {
    const GroupBatch batch = collect_batch(init, env, 1, G, rng);
    const GroupSample& grp = batch.groups.front();
    const HoeffdingParts parts = hoeffding_decompose(init, env, grp);
    const std::vector<double> u = ustat_average(init, env, grp);
    std::vector<double> sum = parts.h0;
    axpy(1.0, parts.first_order, sum);
    axpy(1.0, parts.second_order, sum);
    const double residual = norm(vec_sub(sum, u));
    csv.row(k, grp.prompt_id, norm2(parts.h0), norm2(parts.first_order),
            norm2(parts.second_order), residual);
    rows.push_back(json::parse(parts.to_json()));
  }
  if (ctx.want_csv) write_text(ctx.out / "decompose.csv", csv.str());
  ctx.results["groups"] = rows;
  ctx.summary << "decomposed " << groups << " groups at G=" << G << "\n";
}

void write_trace(RunContext& ctx, const Environment& env, const TrainTrace& trace) {
  Csv csv("iter,J,gap,grad_norm,clipped");
  for (const auto& row : trace.rows)
    csv.row(row.iter, row.objective, row.gap, row.grad_norm, row.clipped ? 1 : 0);
  if (ctx.want_csv) write_text(ctx.out / "trace.csv", csv.str());
  for (const auto& [iter, params] : trace.snapshots)
    save_policy_csv(params, env, (ctx.out / ("snapshot_" + std::to_string(iter) + ".csv")).string());
  json j;
  j["diverged"] = trace.diverged;
  j["clip_count"] = trace.clip_count;
  j["final_J"] = trace.rows.back().objective;
  j["final_gap"] = trace.rows.back().gap;
  ctx.results["train"] = j;
  ctx.summary << "final J " << trace.rows.back().objective << ", gap "
              << trace.rows.back().gap << ", clips " << trace.clip_count << "\n";
}

void run_train(RunContext& ctx, const Environment& env, const PolicyParams& init,
               bool practical) {
  const json params = ctx.spec.value("params", json::object());
  const TrainConfig config = build_train_config(params, ctx.seed, practical);
  Rng rng(ctx.seed, 2);
  const TrainTrace trace = practical ? train_grpo_practical(env, init, config, rng)
                                     : train_meta(env, init, config, rng);
  write_trace(ctx, env, trace);
}

void run_scaling_law(RunContext& ctx, const Environment& env, const PolicyParams& init) {
  const json params = ctx.spec.value("params", json::object());
  const int budget = params.at("budget").get<int>();
  const std::vector<int> grid =
      params.value("grid", std::vector<int>{4, 8, 16, 32, 64});
  const std::vector<int> fit = params.value("g_fit", std::vector<int>{grid.front(), grid.back()});
  const ScalingEstimate constants = estimate_constants({init}, env, fit.at(0), fit.at(1));
  const auto table = scaling_shape_table(init, env, constants, budget, grid);

  Csv csv("G,B,exact_mse,model_mse,rel_err");
  for (const auto& row : table) csv.row(row.G, row.B, row.exact_mse, row.model_mse, row.rel_err);
  if (ctx.want_csv) write_text(ctx.out / "scaling_shape.csv", csv.str());
  ctx.results["constants"] = {{"c1", constants.c1},
                              {"c2", constants.c2},
                              {"c3", constants.c3},
                              {"g_star", constants.g_star_infinite ? json("inf") : json(constants.g_star)},
                              {"g_star_infinite", constants.g_star_infinite},
                              {"g_fit", {constants.g_fit_lo, constants.g_fit_hi}}};
  json rows = json::array();
  for (const auto& row : table)
    rows.push_back({{"G", row.G}, {"B", row.B}, {"exact_mse", row.exact_mse},
                    {"model_mse", row.model_mse}, {"rel_err", row.rel_err}});
  ctx.results["shape"] = rows;
  ctx.summary << "c1=" << constants.c1 << " c2=" << constants.c2 << " c3=" << constants.c3
              << " G*=" << (constants.g_star_infinite ? std::string("inf")
                                                      : std::to_string(constants.g_star))
              << "\n";
}

void run_group_sweep(RunContext& ctx, const Environment& env, const PolicyParams& init) {
  const json params = ctx.spec.value("params", json::object());
  const int budget = params.at("budget").get<int>();
  const std::vector<int> g_list = params.at("G_list").get<std::vector<int>>();
  const int runs = params.value("runs", 50);
  const TrainConfig tmpl = build_train_config(params.value("train", json::object()), ctx.seed, false);
  const GroupSweepResult sweep =
      group_size_sweep(env, init, budget, g_list, tmpl, runs, Rng::mix(ctx.seed, 3));

  Csv csv("G,B,runs,mean,ci_lo,ci_hi,mean_gap,gap_ci_lo,gap_ci_hi,clips");
  json rows = json::array();
  for (const auto& cell : sweep.cells) {
    csv.row(cell.G, cell.B, cell.runs, cell.mean_final_j, cell.mean_final_j - cell.ci_j,
            cell.mean_final_j + cell.ci_j, cell.mean_final_gap, cell.mean_final_gap - cell.ci_gap,
            cell.mean_final_gap + cell.ci_gap, cell.clip_count);
    rows.push_back({{"G", cell.G}, {"B", cell.B}, {"runs", cell.runs},
                    {"mean_final_J", cell.mean_final_j}, {"ci_J", cell.ci_j},
                    {"mean_final_gap", cell.mean_final_gap}, {"ci_gap", cell.ci_gap},
                    {"clips", cell.clip_count}});
  }
  if (ctx.want_csv) write_text(ctx.out / "group_sweep.csv", csv.str());
  ctx.results["cells"] = rows;
  ctx.results["best_G"] = sweep.best_g;
  ctx.summary << "best G by mean final J: " << sweep.best_g << "\n";
}

void run_asymptotics(RunContext& ctx) {
  const json params = ctx.spec.value("params", json::object());
  const SyntheticQuadratic quad = build_quadratic(params.at("quadratic"));
  AsymptoticsConfig config;
  config.beta = params.value("beta", 1.0);
  config.n = params.value("n", 10000);
  config.runs = params.value("runs", 2000);
  config.mixture_samples = params.value("mixture_samples", 100000);
  if (params.contains("theta0")) config.theta0 = to_vec(params["theta0"].get<std::vector<double>>());
  const AsymptoticsReport report = asymptotics_pipeline(quad, config, Rng::mix(ctx.seed, 4));
  ctx.results["asymptotics"] = json::parse(report.to_json(false));
  if (ctx.want_csv) {
    Csv csv("scaled_gap");
    for (double v : report.scaled_gaps) csv.row(v);
    write_text(ctx.out / "scaled_gaps.csv", csv.str());
  }
  ctx.summary << "rank " << report.rank << ", ks " << report.ks_stat << ", weights";
  for (double w : report.weights) ctx.summary << ' ' << w;
  ctx.summary << "\n";
}

void run_bias_curve(RunContext& ctx, const Environment& env, const PolicyParams& init) {
  const json params = ctx.spec.value("params", json::object());
  const std::vector<double> displacements = params.at("displacements").get<std::vector<double>>();
  const double kappa = params.value("kappa", 0.0);
  const int B = params.value("B", 4);
  const int G = params.value("G", 16);
  const int reps = params.value("reps", 2000);

  std::vector<double> direction;
  if (params.contains("direction")) {
    direction = params["direction"].get<std::vector<double>>();
  } else {
    Rng rng(ctx.seed, 5);
    direction.resize(init.logits.size());
    for (auto& v : direction) v = rng.normal();
    const double n = norm(direction);
    for (auto& v : direction) v /= n;
  }
  const BiasCurve curve = practical_bias_curve(env, init, direction, displacements, kappa, B, G,
                                               reps, Rng::mix(ctx.seed, 6));
  Csv csv("displacement,bias_norm,mc_halfwidth");
  json rows = json::array();
  for (const auto& row : curve.rows) {
    csv.row(row.displacement, row.bias_norm, row.mc_halfwidth);
    rows.push_back({{"displacement", row.displacement}, {"bias_norm", row.bias_norm},
                    {"mc_halfwidth", row.mc_halfwidth}});
  }
  if (ctx.want_csv) write_text(ctx.out / "bias_curve.csv", csv.str());
  ctx.results["rows"] = rows;
  ctx.results["slope"] = curve.slope;
  ctx.summary << "bias slope " << curve.slope << "\n";
}

void run_arcsin_check(RunContext& ctx, const Environment& env, const PolicyParams& init) {
  const json params = ctx.spec.value("params", json::object());
  const ArcsinReport report =
      arcsin_gradient_check(init, env, params.value("G", 64), params.value("delta", 0.05),
                            params.value("fd_step", 1e-5));
  ctx.results["max_rel_err"] = report.max_rel_err;
  ctx.results["prompt_values"] = report.prompt_values;
  ctx.results["prompt_factors"] = report.prompt_factors;
  ctx.results["G"] = report.G;
  ctx.summary << "arcsin max rel err " << report.max_rel_err << " at G=" << report.G << "\n";
}

}  // namespace

std::vector<std::string> validate_experiment(const std::string& spec_path) {
  std::vector<std::string> diags;
  json spec;
  try {
    spec = load_spec_json(spec_path);
  } catch (const std::exception& e) {
    diags.push_back(e.what());
    return diags;
  }
  check_schema(spec, diags);
  return diags;
}

RunOutcome run_experiment(const std::string& spec_path, const RunOverrides& overrides) {
  RunOutcome outcome;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    json spec = load_spec_json(spec_path);
    std::vector<std::string> diags;
    check_schema(spec, diags);
    if (overrides.seed) spec["seed"] = *overrides.seed;
    if (!diags.empty() && !(diags.size() == 1 && overrides.seed &&
                            diags.front().find("'seed'") != std::string::npos)) {
      json err;
      err["code"] = 2;
      err["diagnostics"] = diags;
      throw ValidationError(err.dump());
    }
    if (!spec.contains("seed")) throw ValidationError("spec: seed required");

    if (overrides.workers) set_worker_count(*overrides.workers);
    RunContext ctx;
    ctx.spec = spec;
    ctx.seed = spec["seed"].get<std::uint64_t>();
    const std::string format = overrides.format.value_or(spec.value("format", "both"));
    ctx.want_csv = format == "csv" || format == "both";
    ctx.want_json = format == "json" || format == "both";
    const std::string base = overrides.out_dir.value_or(spec.value("out", "results"));
    const std::string command = spec["command"];
    ctx.out = fresh_out_dir(base, command, ctx.seed);
    outcome.out_dir = ctx.out.string();

    json resolved_env;
    if (command == "asymptotics") {
      run_asymptotics(ctx);
    } else {
      const Environment env = build_env(spec);
      resolved_env = json::parse(env_spec_to_json_text(env.spec()));
      auto shape = PolicyShape::from_env(env);
      const PolicyParams init = build_policy(spec, env, shape, ctx.seed);
      if (command == "mse-sweep") run_mse_sweep(ctx, env, init);
      else if (command == "decompose") run_decompose(ctx, env, init);
      else if (command == "train") run_train(ctx, env, init, false);
      else if (command == "grpo-train") run_train(ctx, env, init, true);
      else if (command == "scaling-law") run_scaling_law(ctx, env, init);
      else if (command == "group-sweep") run_group_sweep(ctx, env, init);
      else if (command == "bias-curve") run_bias_curve(ctx, env, init);
      else if (command == "arcsin-check") run_arcsin_check(ctx, env, init);
      else throw ValidationError("unknown command " + command);
    }

    const auto wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
    json manifest;
    manifest["spec"] = spec;
    manifest["resolved_env"] = resolved_env;
    manifest["seed"] = ctx.seed;
    manifest["version"] = kVersion;
    manifest["workers"] = worker_count();
    manifest["wall_ms"] = wall_ms;
    write_text(ctx.out / "manifest.json", manifest.dump(2));
    if (ctx.want_json) write_text(ctx.out / "result.json", ctx.results.dump(2));
    write_text(ctx.out / "summary.txt", ctx.summary.str());
    outcome.exit_code = 0;
  } catch (const ValidationError& e) {
    outcome.exit_code = 2;
    json err;
    err["code"] = 2;
    err["error"] = e.what();
    outcome.error_json = err.dump();
  } catch (const RejectionError& e) {
    outcome.exit_code = 3;
    json err;
    err["code"] = 3;
    err["error"] = e.what();
    outcome.error_json = err.dump();
  } catch (const std::exception& e) {
    outcome.exit_code = 4;
    json err;
    err["code"] = 4;
    err["error"] = e.what();
    outcome.error_json = err.dump();
  }
  return outcome;
}

}  // namespace grpolab
