// vidlink: command line front end for the uplink simulator and live mode.
//
//   vidlink run <scenario> [--no-adaptation] [--seed N] [--out DIR]
//   vidlink compare <scenario> [--seed N] [--out DIR]
//   vidlink live --role client|server --scenario S --peer ADDR [--out DIR]
//   vidlink validate <scenario>
//
// <scenario> is either "paper-default" or a path to a scenario file.
// VIDLINK_OUT_DIR replaces the default output directory; --out wins over it.
//
// Exit codes: 0 ok, 1 usage, 2 validation, 3 runtime.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "vidlink/errors.h"
#include "vidlink/live.h"
#include "vidlink/metrics.h"
#include "vidlink/scenario.h"
#include "vidlink/simulation.h"

namespace {

namespace fs = std::filesystem;
using vidlink::RunSummary;
using vidlink::Scenario;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;
constexpr char kOutDirEnv[] = "VIDLINK_OUT_DIR";

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

fs::path OutputDir(const std::string& flag, const std::string& fallback) {
  if (!flag.empty())
    return flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env)
    return env;
  return fs::path("vidlink-out") / fallback;
}

std::string ArmName(bool adaptation) {
  return adaptation ? "adaptive" : "fixed";
}

Scenario Load(const std::string& name, std::optional<uint64_t> seed) {
  Scenario s = vidlink::LoadScenario(name);
  if (seed)
    s.seed = *seed;
  return s;
}

void PrintSummary(const RunSummary& s, const fs::path& dir) {
  std::cout << s.scenario << " [" << ArmName(s.adaptation_enabled)
            << ", seed " << s.seed << "]\n"
            << "  detections:         " << s.completed_detections << " of "
            << s.primary_frames << " frames\n"
            << "  frame loss:         " << s.frame_loss_fraction << "\n"
            << "  budget violations:  " << s.violation_fraction << "\n"
            << "  median RTT:         " << s.rtt.median_us / 1000.0 << " ms"
            << " (IQR " << (s.rtt.p75_us - s.rtt.p25_us) / 1000.0 << " ms)\n"
            << "  median e2e:         " << s.e2e.median_us / 1000.0 << " ms\n"
            << "  output:             " << dir.string() << "\n";
}

int RunCommand(const std::string& name, bool no_adaptation,
               std::optional<uint64_t> seed, const std::string& out) {
  Scenario s = Load(name, seed);
  if (no_adaptation)
    s.adaptation_enabled = false;
  const fs::path dir = OutputDir(
      out, s.name + "-" + ArmName(s.adaptation_enabled) + "-seed" +
               std::to_string(s.seed));
  const auto result = vidlink::RunSimAndExport(s, dir);
  PrintSummary(result.summary, dir);
  return kExitOk;
}

int CompareCommand(const std::string& name, std::optional<uint64_t> seed,
                   const std::string& out) {
  Scenario s = Load(name, seed);
  const fs::path dir =
      OutputDir(out, s.name + "-compare-seed" + std::to_string(s.seed));
  s.adaptation_enabled = true;
  const auto on = vidlink::RunSimAndExport(s, dir / ArmName(true));
  s.adaptation_enabled = false;
  const auto off = vidlink::RunSimAndExport(s, dir / ArmName(false));

  nlohmann::ordered_json delta;
  delta["scenario"] = s.name;
  delta["seed"] = s.seed;
  delta["median_rtt_us"] = {{"adaptive", on.summary.rtt.median_us},
                            {"fixed", off.summary.rtt.median_us},
                            {"delta", on.summary.rtt.median_us -
                                          off.summary.rtt.median_us}};
  delta["violation_fraction"] = {
      {"adaptive", on.summary.violation_fraction},
      {"fixed", off.summary.violation_fraction},
      {"delta",
       on.summary.violation_fraction - off.summary.violation_fraction}};
  const fs::path delta_path = dir / "delta.json";
  std::ofstream f(delta_path);
  f << delta.dump(2) << "\n";
  if (!f)
    throw vidlink::IoError("cannot write " + delta_path.string());

  PrintSummary(on.summary, dir / ArmName(true));
  PrintSummary(off.summary, dir / ArmName(false));
  std::cout << "delta: median RTT "
            << (on.summary.rtt.median_us - off.summary.rtt.median_us) / 1000.0
            << " ms, violations "
            << on.summary.violation_fraction - off.summary.violation_fraction
            << "\n";
  return kExitOk;
}

int LiveCommand(const std::string& role, const std::string& name,
                const std::string& peer, bool no_adaptation,
                const std::string& out) {
  Scenario s = Load(name, std::nullopt);
  if (no_adaptation)
    s.adaptation_enabled = false;
  const auto endpoint = vidlink::Endpoint::Parse(peer, s.live.port);
  if (role == "server") {
    std::signal(SIGINT, OnSignal);
    std::signal(SIGTERM, OnSignal);
    std::cout << "serving on " << endpoint.ToString() << "\n" << std::flush;
    const auto stats = vidlink::RunLiveServer(s, endpoint, &g_stop);
    std::cout << "packets " << stats.packets << ", frames " << stats.frames
              << ", feedback " << stats.feedback_sent << ", results "
              << stats.results_sent << ", stale drops " << stats.stale_dropped
              << "\n";
    return kExitOk;
  }
  const auto result = vidlink::RunLiveClient(s, endpoint);
  const fs::path dir =
      OutputDir(out, s.name + "-live-" + ArmName(s.adaptation_enabled));
  vidlink::ExportRun(dir, result.summary, result.frames, result.epochs);
  PrintSummary(result.summary, dir);
  return kExitOk;
}

int ValidateCommand(const std::string& name) {
  const Scenario s = vidlink::LoadScenario(name);
  std::cout << s.name << ": ok\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive video uplink simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::optional<uint64_t> seed;
  bool no_adaptation = false;
  bool adaptation = false;

  auto* run = app.add_subcommand("run", "Simulate one arm of a scenario");
  run->add_option("scenario", scenario, "Scenario name or file")->required();
  auto* no_adapt_flag =
      run->add_flag("--no-adaptation", no_adaptation, "Use the fixed encoder");
  run->add_flag("--adaptation", adaptation, "Use the adaptation controller")
      ->excludes(no_adapt_flag);
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Output directory");

  auto* compare =
      app.add_subcommand("compare", "Simulate both arms with one seed");
  compare->add_option("scenario", scenario, "Scenario name or file")
      ->required();
  compare->add_option("--seed", seed, "Override the scenario seed");
  compare->add_option("--out", out, "Output directory");

  std::string role;
  std::string peer;
  auto* live = app.add_subcommand("live", "Stream over datagram sockets");
  live->add_option("--role", role, "client or server")
      ->required()
      ->check(CLI::IsMember({"client", "server"}));
  live->add_option("--scenario", scenario, "Scenario name or file")
      ->required();
  live->add_option("--peer", peer,
                   "Server address (client) or bind address (server)")
      ->required();
  live->add_flag("--no-adaptation", no_adaptation, "Use the fixed encoder");
  live->add_option("--out", out, "Output directory");

  auto* validate =
      app.add_subcommand("validate", "Check a scenario and report errors");
  validate->add_option("scenario", scenario, "Scenario name or file")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run)
      return RunCommand(scenario, no_adaptation, seed, out);
    if (*compare)
      return CompareCommand(scenario, seed, out);
    if (*live)
      return LiveCommand(role, scenario, peer, no_adaptation, out);
    return ValidateCommand(scenario);
  } catch (const vidlink::ValidationError& e) {
    std::cerr << "vidlink: " << e.what() << "\n";
    return kExitValidation;
  } catch (const vidlink::ConfigError& e) {
    std::cerr << "vidlink: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "vidlink: " << e.what() << "\n";
    return kExitRuntime;
  }
}
