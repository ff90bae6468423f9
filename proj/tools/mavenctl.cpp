// mavenctl: synth, train, eval and gradcheck driven by one run config.
//
// Exit codes: 0 ok, 1 usage or config, 2 data error, 3 numeric failure.
// Errors print exactly one line: "error: <Code>: <message>".

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maven/error.hpp"
#include "maven/gradcheck_suite.hpp"
#include "maven/run_config.hpp"
#include "maven/synth.hpp"
#include "maven/trainer.hpp"

namespace {

using namespace maven;

struct ConfigFlags {
  std::string preset = "desk";
  std::string file;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "desk | paper | abaw-sec42 | overfit")->capture_default_str();
    cmd->add_option("--config", file, "JSON config merged over the preset");
    cmd->add_option("--set", overrides, "dotted override, e.g. model.d_v=32")->take_all();
  }
  RunConfig resolve() const { return resolve_config(preset, file, overrides); }
};

void line(const std::string& s) { std::cout << s << '\n' << std::flush; }

int cmd_synth(const ConfigFlags& flags, const std::string& out_dir) {
  RunConfig cfg = flags.resolve();
  if (!out_dir.empty()) cfg.paths.data_dir = out_dir;
  const auto manifest = synth::generate(cfg.synth, cfg.paths.data_dir);
  line("wrote " + std::to_string(manifest.clips.size()) + " clips to " +
       (std::filesystem::path(cfg.paths.data_dir) / "manifest.jsonl").string());
  return 0;
}

int cmd_train(const ConfigFlags& flags, bool quiet) {
  const RunConfig cfg = flags.resolve();
  const auto out = train::run_training(cfg, [&](const train::EpochLog& e) {
    if (!quiet) line(e.to_text());
  });
  const auto& last = out.fit.epochs.back();
  std::ostringstream s;
  s << std::setprecision(6) << "done: " << out.fit.steps << " steps, final train_mse " << last.train_mse
    << " train_ccc " << last.train_ccc;
  if (last.val_ccc) s << " val_ccc " << *last.val_ccc;
  s << ", best epoch " << out.fit.best_epoch << " -> " << (out.run_dir / "best.mvnc").string();
  line(s.str());
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, const std::string& split,
             const std::string& out_dir) {
  RunConfig cfg = flags.resolve();
  if (!checkpoint.empty()) cfg.paths.checkpoint = checkpoint;
  if (!split.empty()) cfg.paths.eval_split = split;
  const std::filesystem::path dir = out_dir.empty() ? cfg.run_dir() / ("eval-" + cfg.paths.eval_split) : std::filesystem::path(out_dir);
  const auto out = train::run_evaluation(cfg, dir);
  std::cout << out.report.to_text();
  line("wrote " + (dir / "report.json").string());
  return 0;
}

int cmd_gradcheck(const ConfigFlags& flags, const std::string& fault, double tol) {
  const RunConfig cfg = flags.resolve();
  GradCheckSuiteSettings s;
  s.model = cfg.model;
  s.h = cfg.gradcheck.h;
  s.tol = tol > 0.0 ? tol : cfg.gradcheck.tol;
  s.coords_per_tensor = cfg.gradcheck.coords_per_tensor;
  s.seed = cfg.seed;
  if (!fault.empty()) set_backward_fault(fault);
  const auto result = run_gradcheck_suite(s, [](const GradCheckReport& r) {
    std::ostringstream o;
    o << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(28) << r.name << std::setprecision(3)
      << " max_rel_error " << r.max_rel_error << "  (" << r.worst_coordinate << ")";
    line(o.str());
  });
  set_backward_fault(std::nullopt);
  std::ostringstream summary;
  summary << std::setprecision(3) << result.components.size() << " components in " << result.seconds << " s";
  line(summary.str());
  if (!result.passed()) {
    std::string names;
    for (const auto& n : result.failures()) names += (names.empty() ? "" : ",") + n;
    std::ostringstream msg;
    msg << result.failures().size() << " failed at tol " << s.tol << ": " << names;
    throw Error(ErrorCode::GradCheckFailed, msg.str());
  }
  return 0;
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mavenctl: tri-modal valence/arousal model tooling"};
  app.require_subcommand(1);

  ConfigFlags synth_flags, train_flags, eval_flags, grad_flags;
  std::string synth_out, checkpoint, split, eval_out, fault;
  double tol = 0.0;
  bool quiet = false;

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic feature-level dataset");
  synth_flags.attach(synth_cmd);
  synth_cmd->add_option("--out", synth_out, "dataset directory (overrides paths.data_dir)");

  auto* train_cmd = app.add_subcommand("train", "train on paths.train_split, select on paths.eval_split");
  train_flags.attach(train_cmd);
  train_cmd->add_flag("--quiet", quiet, "only print the final line");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint archive (default <run_dir>/best.mvnc)");
  eval_cmd->add_option("--split", split, "split to evaluate (default paths.eval_split)");
  eval_cmd->add_option("--out", eval_out, "report directory (default <run_dir>/eval-<split>)");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every kernel and the full model");
  grad_flags.attach(grad_cmd);
  grad_cmd->add_option("--inject-fault", fault, "negate the backward rule of this op");
  grad_cmd->add_option("--tol", tol, "relative error tolerance (default gradcheck.tol)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: Usage: " << one_line(e.what()) << '\n';
    return 1;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth_flags, synth_out);
    if (*train_cmd) return cmd_train(train_flags, quiet);
    if (*eval_cmd) return cmd_eval(eval_flags, checkpoint, split, eval_out);
    if (*grad_cmd) return cmd_gradcheck(grad_flags, fault, tol);
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << '\n';
    return exit_class(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << one_line(e.what()) << '\n';
    return 2;
  }
  return 1;
}
