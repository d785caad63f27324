// gazesim: command-line front end for the gaze-attention library.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include "gazeattn/experiment.hpp"
#include "gazeattn/gaze_models.hpp"
#include "gazeattn/io.hpp"
#include "gazeattn/protocol.hpp"
#include "gazeattn/ws_server.hpp"

namespace fs = std::filesystem;
using namespace gazeattn;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw Error(ErrorKind::ConfigInvalid, "cannot write " + p.string());
  return f;
}

std::ifstream open_in(const std::string& p) {
  std::ifstream f(p);
  if (!f) throw Error(ErrorKind::ConfigInvalid, "cannot read " + p);
  return f;
}

int fit_gaze(const std::string& csv, std::uint64_t seed, std::size_t folds, const std::string& out) {
  auto in = open_in(csv);
  const auto obs = io::read_observations_csv(in);
  const auto rep = gaze_models::analyze_observations(obs, folds, seed);
  const std::string text = io::to_json(rep).dump(2);
  if (out.empty()) {
    std::cout << text << '\n';
  } else {
    open_out(out) << text << '\n';
  }
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int synth_gaze(const std::string& out, std::uint64_t seed, std::size_t looking, std::size_t pointing) {
  gaze_models::StudyGenerator g;
  g.looking = looking;
  g.pointing = pointing;
  auto f = open_out(out);
  io::write_observations_csv(f, gaze_models::synthesize_observations(g, seed));
  return 0;
}

int run_experiment(const std::string& plan_file, const fs::path& dir, bool logs) {
  const auto plan = plan_file.empty() ? experiment::ExperimentPlan{}
                                      : io::plan_from_json(io::read_json_file(plan_file));
  fs::create_directories(dir);
  const auto result = experiment::run_experiment(plan, logs);
  const auto samples = result.samples();
  {
    auto f = open_out(dir / "samples.jsonl");
    io::write_samples_jsonl(f, samples);
  }
  if (logs) {
    fs::create_directories(dir / "trials");
    for (const auto& t : result.trials) {
      auto f = open_out(dir / "trials" / ("trial_" + std::to_string(t.spec.trial_id) + ".jsonl"));
      io::write_trial_log(f, t, plan.params.game);
    }
  }
  open_out(dir / "plan.json") << io::to_json(plan).dump(2) << '\n';
  const auto rep = experiment::report(samples);
  {
    auto f = open_out(dir / "report.csv");
    io::write_report_csv(f, rep);
  }
  const auto& ranges = experiment::speed_ranges();
  for (std::size_t r = 0; r < ranges.size(); ++r) {
    auto f = open_out(dir / ("pvalues_" + ranges[r].label + ".csv"));
    io::write_pvalues_csv(f, rep, r);
  }

  std::printf("%zu trials, %zu samples, %.2f%% outside speed ranges\n", result.trials.size(),
              samples.size(), 100.0 * rep.discarded_fraction);
  std::printf("%-12s %8s %8s %8s\n", "mode", ranges[0].label.c_str(), ranges[1].label.c_str(),
              ranges[2].label.c_str());
  for (std::size_t m = 0; m < rep.modes.size(); ++m) {
    std::printf("%-12s", std::string(to_string(rep.modes[m])).c_str());
    for (std::size_t r = 0; r < 3; ++r) std::printf(" %8.3f", rep.cells[m][r].mean);
    std::printf("\n");
  }
  return 0;
}

int serve(unsigned short port, const std::string& config_file, const std::string& log_dir) {
  server::ServerOptions opts;
  if (!config_file.empty()) {
    opts.base = protocol::session_config_from_json(io::read_json_file(config_file));
  }
  opts.log_dir = log_dir;
  std::cerr << "serving on ws://0.0.0.0:" << port << '\n';
  server::serve(port, std::move(opts));
  return 0;
}

// Session input logs are re-simulated; trial logs re-run the game from the
// logged tick inputs and are compared with the logged samples.
int replay(const std::string& file) {
  std::string first;
  {
    auto in = open_in(file);
    std::getline(in, first);
  }
  const auto type = io::json::parse(first).value("type", std::string());
  auto in = open_in(file);
  if (type == "session") {
    const auto log = protocol::read_session_log(in);
    const auto s = realtime::replay_inputs(log.id, log.config, log.inputs);
    const auto& sc = s->score();
    std::printf("session %llu: %zu ticks, completed %zu, failed %zu, spawned %zu\n",
                static_cast<unsigned long long>(log.id), log.inputs.size(), sc.completed, sc.failed,
                sc.total_spawned);
    return 0;
  }
  const auto log = io::read_trial_log(in);
  game::ScoreCounters sc;
  const auto samples = sim::replay_game(log.game, log.spec.game_seed, log.spec.trial_id,
                                        log.spec.mode, log.ticks, &sc);
  std::ostringstream a, b;
  io::write_samples_jsonl(a, samples);
  io::write_samples_jsonl(b, log.samples);
  const bool same = a.str() == b.str();
  std::printf("trial %llu: completed %zu, failed %zu; samples %s\n",
              static_cast<unsigned long long>(log.spec.trial_id), sc.completed, sc.failed,
              same ? "identical" : "DIFFER");
  return same ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze-driven attention estimation for a handheld robot"};
  app.require_subcommand(1);

  std::string csv, out;
  std::uint64_t seed = 1;
  std::size_t folds = 5;
  auto* fit = app.add_subcommand("fit-gaze", "Fit error and trackability models to observations");
  fit->add_option("observations", csv, "CSV: delta_phi_deg,error_deg,tracked,phase")->required();
  fit->add_option("--seed", seed, "Fold shuffle seed");
  fit->add_option("--folds", folds, "Cross-validation folds")->check(CLI::Range(2, 1000));
  fit->add_option("--out", out, "Write the JSON report here instead of stdout");

  std::string synth_out;
  std::uint64_t synth_seed = 1;
  std::size_t looking = 330, pointing = 331;
  auto* synth = app.add_subcommand("synth-gaze", "Generate study-like observations");
  synth->add_option("--out", synth_out, "CSV path")->required();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--looking", looking);
  synth->add_option("--pointing", pointing);

  std::string plan_file, out_dir;
  bool logs = false;
  auto* exp = app.add_subcommand("experiment", "Run a synthetic mode-comparison experiment");
  exp->add_option("--plan", plan_file, "Plan JSON (defaults apply to missing keys)")->required();
  exp->add_option("--out", out_dir, "Output directory")->required();
  exp->add_flag("--trial-logs", logs, "Also write per-trial JSONL logs");

  auto* defaults = app.add_subcommand("default-plan", "Print the default experiment plan");

  unsigned short port = 8080;
  std::string config_file, log_dir;
  auto* srv = app.add_subcommand("serve", "Host live sessions over WebSocket");
  srv->add_option("--port", port)->required();
  srv->add_option("--config", config_file, "Session config JSON")->required();
  srv->add_option("--log-dir", log_dir, "Write session input and trial logs here");

  std::string replay_file;
  auto* rep = app.add_subcommand("replay", "Replay a session input log or a trial log");
  rep->add_option("log", replay_file)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*fit) return fit_gaze(csv, seed, folds, out);
    if (*synth) return synth_gaze(synth_out, synth_seed, looking, pointing);
    if (*exp) return run_experiment(plan_file, out_dir, logs);
    if (*defaults) {
      std::cout << io::to_json(experiment::ExperimentPlan{}).dump(2) << '\n';
      return 0;
    }
    if (*srv) return serve(port, config_file, log_dir);
    if (*rep) return replay(replay_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
