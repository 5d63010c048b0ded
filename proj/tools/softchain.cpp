#include <softchain/analytics.hpp>
#include <softchain/bench.hpp>
#include <softchain/calib.hpp>
#include <softchain/env.hpp>
#include <softchain/model.hpp>
#include <softchain/plot.hpp>
#include <softchain/wire.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using namespace softchain;

namespace {

struct LoadedModel {
  RobotModel model;
  std::string path;  // "<builtin>" for the compiled-in default
  std::string text;
};

LoadedModel load(const std::string& flag) {
  std::string path = flag;
  if (path.empty())
    if (const char* env = std::getenv("SOFTCHAIN_MODEL")) path = env;
  LoadedModel m;
  if (path.empty()) {
    m.model = default_model();
    m.path = "<builtin>";
    m.text = serialize_model(m.model);
    return m;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  m.text = ss.str();
  m.model = parse_model(m.text);
  m.path = path;
  return m;
}

// Same hash git assigns to a blob with this content.
std::string blob_hash(const std::string& content) {
  std::string blob = "blob " + std::to_string(content.size());
  blob += '\0';
  blob += content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr) != 1)
    throw std::runtime_error("sha1 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    const unsigned char c = digest[i];
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

std::string command_line;

void write_manifest(const fs::path& out, const std::string& command, const LoadedModel& m,
                    std::optional<std::uint64_t> seed) {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["argv"] = command_line;
  j["config_path"] = m.path;
  j["seed"] = seed ? nlohmann::ordered_json(*seed) : nlohmann::ordered_json();
  j["output_dir"] = out.string();
  j["model_hash"] = blob_hash(m.text);
  std::ofstream(out / "manifest.json") << j.dump(2) << '\n';
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  return f;
}

void write_text(const fs::path& path, const std::string& text) { open_out(path) << text; }

std::vector<EpisodeRecord> read_run(const fs::path& dir) {
  auto rin = open_in(dir / "records.csv");
  std::vector<EpisodeRecord> recs = read_records_csv(rin);
  if (fs::exists(dir / "actions.csv")) {
    auto ain = open_in(dir / "actions.csv");
    read_actions_csv(ain, recs);
  }
  return recs;
}

// Transition matrix, Stuart-Maxwell and, for an unperturbed/perturbed pair, corrective action.
void compare_runs(const fs::path& a_dir, const fs::path& b_dir, const fs::path& out, int onset_step, int window) {
  const auto a = read_run(a_dir);
  const auto b = read_run(b_dir);
  const TransitionMatrix t = build_transition_matrix(a, b);
  StuartMaxwellResult sm;
  try {
    sm = stuart_maxwell(t);
  } catch (const StatisticsError& e) {
    std::cerr << "stuart-maxwell: " << e.what() << '\n';
  }
  auto tf = open_out(out / "transition.csv");
  write_transition_csv(tf, t, sm);
  std::cout << "stuart-maxwell chi2=" << sm.chi2 << " dof=" << sm.dof << " p=" << sm.p << '\n';

  const bool pair = !a.empty() && !b.empty() && a.front().perturbed != b.front().perturbed;
  if (!pair) return;
  const auto& unperturbed = a.front().perturbed ? b : a;
  const auto& perturbed = a.front().perturbed ? a : b;
  std::vector<CorrectiveTrial> trials;
  for (std::size_t i = 0; i < unperturbed.size(); ++i) {
    CorrectiveTrial tr;
    tr.from = unperturbed[i].outcome;
    tr.to = perturbed[i].outcome;
    tr.series = corrective_series(unperturbed[i].actions, perturbed[i].actions);
    trials.push_back(std::move(tr));
  }
  auto cf = open_out(out / "corrective.csv");
  write_corrective_csv(cf, corrective_table(trials, onset_step, window));
}

std::vector<BoxGroup> groups_from(const std::vector<SweepSummary>& s, bool position) {
  std::vector<BoxGroup> g;
  for (const auto& x : s) g.push_back({"N=" + std::to_string(x.disk_count), position ? x.position : x.orientation});
  return g;
}

Policy replay_policy(std::vector<ActionVector> actions) {
  auto step = std::make_shared<std::size_t>(0);
  auto log = std::make_shared<std::vector<ActionVector>>(std::move(actions));
  return [step, log](const Observation&, const ActionVector& reference) {
    if (log->empty()) return reference;
    const ActionVector a = (*log)[std::min(*step, log->size() - 1)];
    ++*step;
    return a;
  };
}

// ---------------------------------------------------------------------------------------------

struct Common {
  std::string model;
  std::string out;
};

int cmd_sweep(const Common& c, const SweepOptions& o, bool allow_nonconverged) {
  const LoadedModel m = load(c.model);
  const fs::path out = c.out;
  fs::create_directories(out);
  const auto rows = sweep_cc_vs_uj(o);
  const auto summary = summarize_sweep(rows);
  {
    auto f = open_out(out / "err_by_N.csv");
    write_sweep_csv(f, rows);
    auto g = open_out(out / "err_summary.csv");
    write_sweep_summary_csv(g, summary);
  }
  write_text(out / "boxplot_pos.svg",
             boxplot_svg("UJ vs CC tip position error", "position error (m)", groups_from(summary, true)));
  write_text(out / "boxplot_ori.svg",
             boxplot_svg("UJ vs CC tip orientation error", "orientation error (rad)", groups_from(summary, false)));
  write_manifest(out, "sweep-kinematics", m, std::nullopt);
  std::size_t bad = 0;
  for (const auto& s : summary) {
    bad += s.nonconverged;
    std::cout << "N=" << s.disk_count << " pos_mean=" << s.position.mean << " ori_mean=" << s.orientation.mean
              << " nonconverged=" << s.nonconverged << '\n';
  }
  if (bad > 0 && !allow_nonconverged) {
    std::cerr << bad << " IK points did not converge (use --allow-nonconverged to accept)\n";
    return 1;
  }
  return 0;
}

int cmd_noncc(const Common& c, const NonCCOptions& o) {
  const LoadedModel m = load(c.model);
  const fs::path out = c.out;
  fs::create_directories(out);
  const NonCCResult r = nonconstant_curvature_experiment(m.model, o);
  {
    auto f = open_out(out / "noncc_errors.csv");
    write_noncc_csv(f, r.samples);
    auto g = open_out(out / "noncc_summary.csv");
    write_noncc_summary_csv(g, r.summary);
  }
  std::vector<BoxGroup> pos, ori;
  for (const auto& s : r.summary) {
    pos.push_back({s.model, s.position});
    ori.push_back({s.model, s.orientation});
    std::cout << s.model << " pos_mean=" << s.position.mean << " ori_mean=" << s.orientation.mean
              << (s.failure.empty() ? "" : " failed: " + s.failure) << '\n';
  }
  write_text(out / "boxplot_noncc_pos.svg", boxplot_svg("Tip position error vs N=" + std::to_string(o.reference_disks),
                                                        "position error (m)", pos));
  write_text(out / "boxplot_noncc_ori.svg", boxplot_svg("Tip orientation error vs N=" + std::to_string(o.reference_disks),
                                                        "orientation error (rad)", ori));
  write_manifest(out, "noncc", m, std::nullopt);
  return 0;
}

struct EvalArgs {
  EvaluationOptions options;
  std::string policy = "primitive";
  std::string actions;
  std::string reward = "guided";
  std::vector<std::string> compare;
  int onset_step = 160;
  int window = 100;
};

int cmd_evaluate(const Common& c, EvalArgs a) {
  const fs::path out = c.out;
  fs::create_directories(out);
  if (!a.compare.empty()) {
    compare_runs(a.compare.at(0), a.compare.at(1), out, a.onset_step, a.window);
    return 0;
  }
  const LoadedModel m = load(c.model);
  a.options.scheme = parse_reward_scheme(a.reward);
  std::function<Policy(int)> policy_for;
  if (a.policy == "external-log") {
    if (a.actions.empty()) throw std::invalid_argument("--policy external-log needs --actions FILE");
    std::vector<EpisodeRecord> logged(static_cast<std::size_t>(a.options.boxes));
    for (int i = 0; i < a.options.boxes; ++i) logged[i].index = i;
    auto in = open_in(a.actions);
    read_actions_csv(in, logged);
    policy_for = [logged](int i) { return replay_policy(logged[static_cast<std::size_t>(i)].actions); };
  }
  const auto recs = evaluate(m.model, a.options, policy_for);
  const OutcomeSummary s = summarize(recs);
  {
    auto f = open_out(out / "records.csv");
    write_records_csv(f, recs);
    auto g = open_out(out / "actions.csv");
    write_actions_csv(g, recs);
    auto h = open_out(out / "summary.csv");
    write_summary_csv(h, s);
  }
  write_manifest(out, "evaluate", m, a.options.seed);
  std::cout << "episodes=" << s.episodes << " success=" << s.success_rate() << " slip=" << s.slip_rate()
            << " tip=" << s.tip_rate() << " error=" << s.error << '\n';
  return 0;
}

int cmd_bench(const Common& c, BenchOptions o, const std::vector<double>& dt_ms, const std::string& scenario) {
  const LoadedModel m = load(c.model);
  const fs::path out = c.out;
  fs::create_directories(out);
  o.timesteps.clear();
  for (double v : dt_ms) o.timesteps.push_back(v * 1e-3);
  if (scenario == "both") o.scenarios = {BenchScenario::Contact, BenchScenario::Free};
  else o.scenarios = {parse_scenario(scenario)};
  const auto points = run_bench(m.model, o);
  {
    auto f = open_out(out / "bench.csv");
    write_bench_csv(f, points);
  }
  std::map<std::string, Series> series;
  for (const auto& p : points) {
    const std::string key = scenario_name(p.scenario) + " N=" + std::to_string(p.disk_count);
    series[key].label = key;
    if (p.error.empty()) series[key].points.emplace_back(p.dt * 1e3, p.rtf);
    std::cout << scenario_name(p.scenario) << " dt=" << p.dt << " N=" << p.disk_count << " rtf=" << p.rtf
              << (p.error.empty() ? "" : " error: " + p.error) << '\n';
  }
  std::vector<Series> list;
  for (auto& [k, v] : series) list.push_back(v);
  write_text(out / "rtf.svg", line_plot_svg("Real-time factor", "timestep (ms)", "RTF", list, true, true));
  write_manifest(out, "bench", m, std::nullopt);
  return 0;
}

struct EpisodeArgs {
  std::string policy = "primitive";
  std::string actions;
  std::uint64_t seed = 7;
  std::vector<double> box;
  double mass = 5.0;
  std::optional<double> offset_x;
  std::optional<double> yaw_deg;
  bool perturb = false;
  std::string reward = "guided";
  int max_steps = 1200;
};

int cmd_run_episode(const Common& c, const EpisodeArgs& a) {
  const LoadedModel m = load(c.model);
  const fs::path out = c.out;
  fs::create_directories(out);
  EpisodeConfig cfg;
  if (!a.box.empty()) {
    if (a.box.size() != 3) throw std::invalid_argument("--box needs three sizes x,y,z");
    cfg.box.size = Vec3(a.box[0], a.box[1], a.box[2]);
  }
  cfg.box.mass = a.mass;
  cfg.max_steps = a.max_steps;
  cfg.perturbation.enabled = a.perturb;
  if (a.offset_x || a.yaw_deg) {
    cfg.randomize_pose = false;
    cfg.offset_x = a.offset_x.value_or(0.0);
    cfg.yaw = a.yaw_deg.value_or(0.0) * M_PI / 180.0;
  }
  Policy policy;
  if (a.policy == "primitive") {
    policy = primitive_policy();
  } else if (a.policy == "zero") {
    policy = [](const Observation&, const ActionVector&) { return ActionVector{}; };
  } else if (a.policy == "external-log") {
    if (a.actions.empty()) throw std::invalid_argument("--policy external-log needs --actions FILE");
    std::vector<EpisodeRecord> logged(1);
    auto in = open_in(a.actions);
    read_actions_csv(in, logged);
    policy = replay_policy(logged[0].actions);
  } else {
    throw std::invalid_argument("unknown policy '" + a.policy + "'");
  }
  Environment env(m.model, parse_reward_scheme(a.reward));
  EpisodeLog log;
  const EpisodeRecord rec = run_episode(env, cfg, a.seed, policy, &log);
  {
    auto f = open_out(out / "episode.csv");
    log.write_csv(f);
  }
  write_manifest(out, "run-episode", m, a.seed);
  std::cout << "outcome=" << outcome_name(rec.outcome) << " steps=" << rec.length << " reward=" << rec.total_reward
            << '\n';
  return 0;
}

int cmd_analyze(const Common& c, const std::string& log_dir, const std::string& compare, int onset_step, int window) {
  const fs::path out = c.out.empty() ? fs::path(log_dir) : fs::path(c.out);
  fs::create_directories(out);
  const auto recs = read_run(log_dir);
  const OutcomeSummary s = summarize(recs);
  {
    auto f = open_out(out / "summary.csv");
    write_summary_csv(f, s);
    auto g = open_out(out / "correlation.csv");
    write_correlation_csv(g, correlation_matrix(recs, correlation_variables()));
  }
  if (!compare.empty()) compare_runs(log_dir, compare, out, onset_step, window);
  std::cout << "episodes=" << s.episodes << " success=" << s.success_rate() << " slip=" << s.slip_rate()
            << " tip=" << s.tip_rate() << '\n';
  return 0;
}

int cmd_serve(const Common& c, int port, const std::string& host, bool stdio) {
  const LoadedModel m = load(c.model);
  if (stdio) {
    serve_stream(m.model, std::cin, std::cout);
    return 0;
  }
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  TcpServer server(m.model);
  const int bound = server.listen(port, host);
  std::cerr << "listening on " << host << ':' << bound << '\n';
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  });
  server.run();
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 0; i < argc; ++i) command_line += (i ? " " : "") + std::string(argv[i]);

  CLI::App app{"softchain: soft-arm grasping simulator, experiments and environment server"};
  app.require_subcommand(1);
  Common common;
  app.fallthrough();
  app.add_option("--model", common.model, "model file (default: $SOFTCHAIN_MODEL, else built-in)");

  std::string out_sweep = "out/sweep", out_noncc = "out/noncc", out_eval = "out/evaluate",
              out_bench = "out/bench", out_episode = "out/episode", out_analyze;

  SweepOptions sweep;
  bool allow_nonconverged = false;
  auto* s = app.add_subcommand("sweep-kinematics", "UJ-vs-CC inverse kinematics error sweep");
  s->add_option("--n-list", sweep.disk_counts, "disk counts")->delimiter(',');
  s->add_option("--grid", sweep.grid, "grid points per axis")->check(CLI::PositiveNumber);
  s->add_option("--range", sweep.range, "bend range (rad)");
  s->add_option("--length", sweep.length, "joint length (m)");
  s->add_option("--lambda", sweep.lambda, "orientation weight (m/rad), <= 0 for the joint length");
  s->add_option("--alpha", sweep.alpha, "regularizer weight");
  s->add_option("--jobs", sweep.threads, "worker threads (0 = hardware)");
  s->add_option("--out", out_sweep, "output directory");
  s->add_flag("--allow-nonconverged", allow_nonconverged, "exit 0 even if some IK points did not converge");

  NonCCOptions noncc;
  auto* n = app.add_subcommand("noncc", "coarse UJ and CC models against a fine reference during one episode");
  n->add_option("--n-list", noncc.disk_counts, "coarse disk counts")->delimiter(',');
  n->add_option("--reference", noncc.reference_disks, "reference disk count");
  n->add_option("--steps", noncc.policy_steps, "policy steps")->check(CLI::PositiveNumber);
  n->add_option("--jobs", noncc.threads, "worker threads");
  n->add_option("--out", out_noncc, "output directory");

  EvalArgs eval;
  auto* e = app.add_subcommand("evaluate", "batch evaluation over sampled boxes");
  e->add_option("--boxes", eval.options.boxes, "number of boxes")->check(CLI::PositiveNumber);
  e->add_option("--seed", eval.options.seed, "seed");
  e->add_option("--policy", eval.policy, "primitive or external-log")
      ->check(CLI::IsMember({"primitive", "external-log"}));
  e->add_option("--actions", eval.actions, "actions CSV for --policy external-log");
  e->add_flag("--perturb", eval.options.perturb, "apply the periodic downward force");
  e->add_option("--reward", eval.reward, "guided or shaped")->check(CLI::IsMember({"guided", "shaped"}));
  e->add_option("--max-steps", eval.options.max_steps, "episode step limit")->check(CLI::PositiveNumber);
  e->add_option("--jobs", eval.options.threads, "worker threads");
  e->add_option("--compare", eval.compare, "compare two evaluation directories instead of running")
      ->expected(2);
  e->add_option("--onset-step", eval.onset_step, "perturbation onset (policy steps)");
  e->add_option("--window", eval.window, "corrective-action window (steps)");
  e->add_option("--out", out_eval, "output directory");

  BenchOptions bench;
  std::vector<double> dt_ms{0.5, 1, 5, 10};
  std::string scenario = "both";
  auto* b = app.add_subcommand("bench", "single-thread real-time-factor sweep");
  b->add_option("--dt-list", dt_ms, "timesteps (ms)")->delimiter(',');
  b->add_option("--n-list", bench.disk_counts, "disk counts")->delimiter(',');
  b->add_option("--steps", bench.steps, "timed steps per point")->check(CLI::PositiveNumber);
  b->add_option("--warmup", bench.warmup, "untimed steps per point");
  b->add_option("--scenario", scenario, "contact, free or both")->check(CLI::IsMember({"contact", "free", "both"}));
  b->add_option("--out", out_bench, "output directory");

  EpisodeArgs ep;
  auto* r = app.add_subcommand("run-episode", "run and log one episode");
  r->add_option("--policy", ep.policy, "primitive, zero or external-log")
      ->check(CLI::IsMember({"primitive", "zero", "external-log"}));
  r->add_option("--actions", ep.actions, "actions CSV for --policy external-log");
  r->add_option("--seed", ep.seed, "seed");
  r->add_option("--box", ep.box, "box size x,y,z (m)")->delimiter(',');
  r->add_option("--mass", ep.mass, "box mass (kg)");
  r->add_option("--offset-x", ep.offset_x, "fixed placement offset (m)");
  r->add_option("--yaw", ep.yaw_deg, "fixed placement yaw (deg)");
  r->add_flag("--perturb", ep.perturb, "apply the periodic downward force");
  r->add_option("--reward", ep.reward, "guided or shaped")->check(CLI::IsMember({"guided", "shaped"}));
  r->add_option("--max-steps", ep.max_steps, "episode step limit")->check(CLI::PositiveNumber);
  r->add_option("--out", out_episode, "output directory");

  std::string log_dir, compare_dir;
  int onset_step = 160, window = 100;
  auto* a = app.add_subcommand("analyze", "outcome, correlation, transition and corrective-action tables");
  a->add_option("--log", log_dir, "evaluation directory")->required();
  a->add_option("--compare", compare_dir, "second evaluation directory");
  a->add_option("--onset-step", onset_step, "perturbation onset (policy steps)");
  a->add_option("--window", window, "corrective-action window (steps)");
  a->add_option("--out", out_analyze, "output directory (default: the log directory)");

  int port = 5555;
  std::string host = "127.0.0.1";
  bool stdio = false;
  auto* v = app.add_subcommand("serve", "environment server (JSON lines)");
  v->add_option("--port", port, "TCP port");
  v->add_option("--host", host, "listen address");
  v->add_flag("--stdio", stdio, "serve one session on stdin/stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << "error: " << ex.what() << "\n" << app.help();
    return 2;
  }

  try {
    auto with_out = [&](const std::string& o) {
      Common c = common;
      c.out = o;
      return c;
    };
    if (*s) return cmd_sweep(with_out(out_sweep), sweep, allow_nonconverged);
    if (*n) return cmd_noncc(with_out(out_noncc), noncc);
    if (*e) return cmd_evaluate(with_out(out_eval), eval);
    if (*b) return cmd_bench(with_out(out_bench), bench, dt_ms, scenario);
    if (*r) return cmd_run_episode(with_out(out_episode), ep);
    if (*a) return cmd_analyze(with_out(out_analyze), log_dir, compare_dir, onset_step, window);
    if (*v) return cmd_serve(common, port, host, stdio);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 2;
}
