#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "maven/model_config.hpp"
#include "maven/optim.hpp"
#include "maven/synth.hpp"

#include <json.hpp>

namespace maven {

struct ScheduleSettings {
  std::size_t epochs = 50;
  std::size_t batch_size = 8;
  std::size_t max_steps = 0;  // 0 = no cap
};

struct PathSettings {
  std::string data_dir = "data";
  std::string manifest;     // empty: <data_dir>/manifest.jsonl
  std::string run_dir;      // empty: $MAVEN_RUN_ROOT/<name> or runs/<name>
  std::string checkpoint;   // eval input; empty: <run_dir>/best.mvnc
  std::string train_split = "train";
  std::string eval_split = "val";
};

struct GradCheckSettings {
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t coords_per_tensor = 3;
};

// Everything one run needs. Built from a named preset, then a JSON document,
// then dotted --set overrides, in that order.
struct RunConfig {
  std::string name = "desk";
  ModelConfig model;
  OptimizerSettings optimizer;
  ScheduleSettings schedule;
  std::uint64_t seed = 7;
  PathSettings paths;
  synth::KeepSet keep = synth::kKeepAll;
  synth::SynthSpec synth;  // feature dims are taken from model
  GradCheckSettings gradcheck;

  // desk, paper, abaw-sec42, overfit. InvalidConfig for other names.
  static RunConfig preset(const std::string& name);
  static std::vector<std::string> preset_names();

  nlohmann::ordered_json to_json() const;
  // Fields missing from j keep the values of base. InvalidConfig on unknown
  // keys or wrong types.
  static RunConfig from_json(const nlohmann::json& j, const RunConfig& base);

  std::filesystem::path manifest_path() const;
  std::filesystem::path run_dir() const;
  std::filesystem::path checkpoint_path() const;

  void validate() const;
};

// "model.d_v=32" style override; the value is parsed as JSON when it parses,
// otherwise taken as a string.
void apply_override(nlohmann::ordered_json& doc, const std::string& assignment);

// preset -> optional JSON file -> overrides.
RunConfig resolve_config(const std::string& preset, const std::string& config_file,
                         const std::vector<std::string>& overrides);

// Writes config.json into dir.
void echo_config(const RunConfig& cfg, const std::filesystem::path& dir);

}  // namespace maven
