#include "vidlink/scenario.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "vidlink/errors.h"

namespace vidlink {
namespace {

// Three tiers stepping down and back up every 10 s, with a 5 s dip below the
// secondary-stream threshold.
constexpr std::string_view kPaperDefault = R"(# Built-in scenario.
run_length = 60
seed = 1
adaptation_enabled = true
qos_budget = 0.100

primary.fps = 30
primary.resolution = 1920x1080
primary.bitrate = 20e6
primary.gop_length = 30
primary.i_frame_ratio = 1.5
primary.size_jitter = 0.1

secondary.fps = 1
secondary.resolution = 1920x1080
secondary.bitrate = 1.5e6

fixed.bitrate = 20e6
fixed.fps = 30
fixed.resolution = 1920x1080

link.capacity = 0:22e6, 10:17e6, 20:12e6, 30:4e6, 35:12e6, 40:17e6, 50:22e6
link.prop_delay_up = 0.010
link.prop_delay_down = 0.010
link.queue_limit = 2000000
link.downlink_capacity = 50e6
link.mtu = 1220

estimator.epoch_length = 0.1

predictor.order = 4
predictor.window = 10
predictor.safety_factor = 0.9
predictor.step_size = 0.2
predictor.leakage = 0.01

controller.max_bitrate = 20e6
controller.secondary_threshold = 5e6
controller.hysteresis = 0.1
controller.silence_epochs = 2
controller.silence_decay = 0.8
ladder = 0:854x480, 5e6:1280x720, 10e6:1920x1080

edge.workers = 3
edge.detection = lognormal 0.020 0.185
edge.navigation = deterministic 0.300
edge.vlm = deterministic 0.800
)";

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> SplitList(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(Trim(s.substr(0, comma)));
    if (comma == std::string_view::npos)
      break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

double ParseDouble(std::string_view text) {
  text = Trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() ||
      !std::isfinite(v))
    throw ConfigError("expected a number, got '" + std::string(text) + "'");
  return v;
}

double ParsePositive(std::string_view text) {
  const double v = ParseDouble(text);
  if (!(v > 0.0))
    throw ConfigError("must be positive");
  return v;
}

uint64_t ParseUnsigned(std::string_view text) {
  text = Trim(text);
  uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("expected a non-negative integer, got '" +
                      std::string(text) + "'");
  return v;
}

int ParseInt(std::string_view text) {
  const uint64_t v = ParseUnsigned(text);
  if (v > 1'000'000'000)
    throw ConfigError("integer out of range");
  return static_cast<int>(v);
}

bool ParseBool(std::string_view text) {
  text = Trim(text);
  if (text == "true")
    return true;
  if (text == "false")
    return false;
  throw ConfigError("expected true or false, got '" + std::string(text) + "'");
}

// "a:b, c:d" pairs.
std::vector<std::pair<std::string_view, std::string_view>> ParsePairs(
    std::string_view text) {
  std::vector<std::pair<std::string_view, std::string_view>> out;
  for (std::string_view item : SplitList(text)) {
    const auto colon = item.find(':');
    if (colon == std::string_view::npos)
      throw ConfigError("expected 'a:b' entries, got '" + std::string(item) +
                        "'");
    out.emplace_back(Trim(item.substr(0, colon)), Trim(item.substr(colon + 1)));
  }
  return out;
}

CapacitySchedule ParseCapacity(std::string_view text) {
  std::vector<CapacitySchedule::Segment> segments;
  for (auto [t, c] : ParsePairs(text))
    segments.push_back({ParseDouble(t), ParseDouble(c)});
  return CapacitySchedule(std::move(segments));
}

std::vector<ResolutionLadder::Tier> ParseLadder(std::string_view text) {
  std::vector<ResolutionLadder::Tier> tiers;
  for (auto [rate, res] : ParsePairs(text))
    tiers.push_back({ParseDouble(rate), Resolution::Parse(res)});
  return tiers;
}

using Setter = std::function<void(Scenario&, std::string_view)>;

const std::vector<std::pair<std::string, Setter>>& Setters() {
  static const auto* table = new std::vector<std::pair<std::string, Setter>>{
      {"run_length",
       [](Scenario& s, std::string_view v) { s.run_length = ParsePositive(v); }},
      {"seed", [](Scenario& s, std::string_view v) { s.seed = ParseUnsigned(v); }},
      {"adaptation_enabled",
       [](Scenario& s, std::string_view v) {
         s.adaptation_enabled = ParseBool(v);
       }},
      {"qos_budget",
       [](Scenario& s, std::string_view v) { s.qos_budget = ParsePositive(v); }},

      {"primary.fps",
       [](Scenario& s, std::string_view v) { s.primary.fps = ParsePositive(v); }},
      {"primary.resolution",
       [](Scenario& s, std::string_view v) {
         s.primary.resolution = Resolution::Parse(Trim(v));
       }},
      {"primary.bitrate",
       [](Scenario& s, std::string_view v) {
         s.primary.target_bitrate_bps = ParsePositive(v);
       }},
      {"primary.gop_length",
       [](Scenario& s, std::string_view v) { s.primary.gop_length = ParseInt(v); }},
      {"primary.i_frame_ratio",
       [](Scenario& s, std::string_view v) {
         s.primary.i_frame_ratio = ParseDouble(v);
       }},
      {"primary.size_jitter",
       [](Scenario& s, std::string_view v) {
         s.primary.size_jitter = ParseDouble(v);
       }},

      {"secondary.fps",
       [](Scenario& s, std::string_view v) {
         s.secondary.fps = ParsePositive(v);
       }},
      {"secondary.resolution",
       [](Scenario& s, std::string_view v) {
         s.secondary.resolution = Resolution::Parse(Trim(v));
       }},
      {"secondary.bitrate",
       [](Scenario& s, std::string_view v) {
         s.secondary.target_bitrate_bps = ParsePositive(v);
         s.controller.limits.secondary_bitrate_bps =
             s.secondary.target_bitrate_bps;
       }},

      {"fixed.bitrate",
       [](Scenario& s, std::string_view v) {
         s.fixed.bitrate_bps = ParsePositive(v);
       }},
      {"fixed.fps",
       [](Scenario& s, std::string_view v) { s.fixed.fps = ParsePositive(v); }},
      {"fixed.resolution",
       [](Scenario& s, std::string_view v) {
         s.fixed.resolution = Resolution::Parse(Trim(v));
       }},

      {"link.capacity",
       [](Scenario& s, std::string_view v) { s.capacity = ParseCapacity(v); }},
      {"link.prop_delay_up",
       [](Scenario& s, std::string_view v) {
         s.link.prop_delay_up = ParseDouble(v);
       }},
      {"link.prop_delay_down",
       [](Scenario& s, std::string_view v) {
         s.link.prop_delay_down = ParseDouble(v);
       }},
      {"link.queue_limit",
       [](Scenario& s, std::string_view v) {
         s.link.queue_limit = static_cast<size_t>(ParseUnsigned(v));
       }},
      {"link.downlink_capacity",
       [](Scenario& s, std::string_view v) {
         s.link.downlink_capacity_bps = ParsePositive(v);
       }},
      {"link.mtu",
       [](Scenario& s, std::string_view v) {
         s.mtu = static_cast<size_t>(ParseUnsigned(v));
       }},
      {"link.reassembly_expiry",
       [](Scenario& s, std::string_view v) {
         s.reassembly_expiry = ParsePositive(v);
       }},

      {"estimator.epoch_length",
       [](Scenario& s, std::string_view v) {
         s.estimator.epoch_length = ParsePositive(v);
         s.controller.epoch_length = s.estimator.epoch_length;
       }},

      {"predictor.order",
       [](Scenario& s, std::string_view v) {
         s.controller.predictor.order = ParseInt(v);
       }},
      {"predictor.window",
       [](Scenario& s, std::string_view v) {
         s.controller.predictor.window = ParseInt(v);
       }},
      {"predictor.safety_factor",
       [](Scenario& s, std::string_view v) {
         s.controller.predictor.safety_factor = ParseDouble(v);
       }},
      {"predictor.step_size",
       [](Scenario& s, std::string_view v) {
         s.controller.predictor.step_size = ParseDouble(v);
       }},
      {"predictor.leakage",
       [](Scenario& s, std::string_view v) {
         s.controller.predictor.leakage = ParseDouble(v);
       }},
      {"predictor.floor",
       [](Scenario& s, std::string_view v) {
         s.controller.predictor.floor_bps = ParsePositive(v);
         s.controller.limits.floor_bps = s.controller.predictor.floor_bps;
       }},
      {"predictor.initial_rate",
       [](Scenario& s, std::string_view v) {
         s.controller.predictor.initial_rate_bps = ParsePositive(v);
       }},

      {"controller.max_bitrate",
       [](Scenario& s, std::string_view v) {
         s.controller.limits.max_encoder_bitrate_bps = ParsePositive(v);
       }},
      {"controller.secondary_threshold",
       [](Scenario& s, std::string_view v) {
         s.controller.limits.secondary_threshold_bps = ParsePositive(v);
       }},
      {"controller.hysteresis",
       [](Scenario& s, std::string_view v) {
         s.controller.ladder.hysteresis_margin = ParseDouble(v);
       }},
      {"controller.silence_epochs",
       [](Scenario& s, std::string_view v) {
         s.controller.silence_epochs = ParseInt(v);
       }},
      {"controller.silence_decay",
       [](Scenario& s, std::string_view v) {
         s.controller.silence_decay = ParseDouble(v);
       }},
      {"controller.drain_backlog",
       [](Scenario& s, std::string_view v) {
         s.controller.drain_backlog = ParseBool(v);
       }},
      {"ladder",
       [](Scenario& s, std::string_view v) {
         s.controller.ladder.tiers = ParseLadder(v);
       }},

      {"edge.workers",
       [](Scenario& s, std::string_view v) { s.edge.worker_count = ParseInt(v); }},
      {"edge.detection",
       [](Scenario& s, std::string_view v) {
         s.edge.detection = ServiceTimeModel::Parse(Trim(v));
       }},
      {"edge.navigation",
       [](Scenario& s, std::string_view v) {
         s.edge.navigation = ServiceTimeModel::Parse(Trim(v));
       }},
      {"edge.vlm",
       [](Scenario& s, std::string_view v) {
         s.edge.vlm = ServiceTimeModel::Parse(Trim(v));
       }},
      {"edge.stale_drop",
       [](Scenario& s, std::string_view v) { s.edge.stale_drop = ParseBool(v); }},

      {"live.emulate_link",
       [](Scenario& s, std::string_view v) {
         s.live.emulate_link = ParseBool(v);
       }},
      {"live.port",
       [](Scenario& s, std::string_view v) {
         const uint64_t port = ParseUnsigned(v);
         if (port == 0 || port > 65535)
           throw ConfigError("port must be in 1..65535");
         s.live.port = static_cast<uint16_t>(port);
       }},
      {"live.timeout",
       [](Scenario& s, std::string_view v) {
         s.live.unreachable_timeout = ParsePositive(v);
       }},
  };
  return *table;
}

const Setter* FindSetter(std::string_view key) {
  for (const auto& [name, setter] : Setters())
    if (name == key)
      return &setter;
  return nullptr;
}

void Check(bool ok, const char* key, const std::string& what) {
  if (!ok)
    throw ValidationError(key, 0, what);
}

template <typename F>
void Wrap(const char* key, F&& f) {
  try {
    f();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(key, 0, e.what());
  }
}

}  // namespace

Scenario::Scenario() {
  primary.stream_id = kPrimaryStream;
  secondary.stream_id = kSecondaryStream;
  secondary.fps = 1.0;
  secondary.resolution = k1080p;
  secondary.target_bitrate_bps = controller.limits.secondary_bitrate_bps;
  secondary.gop_length = 1;
  secondary.i_frame_ratio = 1.0;
}

void Scenario::Validate() const {
  Check(run_length > 0.0, "run_length", "must be positive");
  Check(qos_budget > 0.0, "qos_budget", "must be positive");
  Wrap("primary", [&] { primary.Validate(); });
  Wrap("secondary", [&] { secondary.Validate(); });
  Check(fixed.bitrate_bps > 0.0 && fixed.fps > 0.0, "fixed",
        "bitrate and fps must be positive");
  Wrap("link", [&] { link.Validate(mtu); });
  Check(reassembly_expiry > 0.0, "link.reassembly_expiry", "must be positive");
  Check(estimator.epoch_length > 0.0, "estimator.epoch_length",
        "must be positive");
  Check(controller.epoch_length == estimator.epoch_length,
        "estimator.epoch_length", "controller and estimator epochs differ");
  Wrap("predictor", [&] { controller.predictor.Validate(); });
  Wrap("ladder", [&] { controller.ladder.Validate(); });
  Wrap("controller", [&] { controller.Validate(); });
  Check(controller.limits.secondary_bitrate_bps ==
            secondary.target_bitrate_bps,
        "secondary.bitrate", "stream and controller allocations differ");
  Wrap("edge", [&] { edge.Validate(); });
  Check(live.unreachable_timeout > 0.0, "live.timeout", "must be positive");
}

Scenario ParseScenario(std::string_view text, std::string name) {
  Scenario s;
  s.name = std::move(name);
  std::set<std::string> seen;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text.remove_prefix(eol == std::string_view::npos ? text.size() : eol + 1);

    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = Trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("", line_no, "expected 'key = value'");
    const std::string key(Trim(line.substr(0, eq)));
    const std::string_view value = Trim(line.substr(eq + 1));
    const Setter* setter = FindSetter(key);
    if (!setter)
      throw ValidationError(key, line_no, "unknown key");
    if (!seen.insert(key).second)
      throw ValidationError(key, line_no, "duplicate key");
    if (value.empty())
      throw ValidationError(key, line_no, "missing value");
    try {
      (*setter)(s, value);
    } catch (const Error& e) {
      throw ValidationError(key, line_no, e.what());
    }
  }
  s.Validate();
  return s;
}

Scenario LoadScenario(const std::string& name_or_path) {
  if (name_or_path == kPaperDefaultName)
    return ParseScenario(kPaperDefault, std::string(kPaperDefaultName));
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in)
    throw IoError("cannot read scenario file " + name_or_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseScenario(buf.str(), name_or_path);
}

std::string_view PaperDefaultText() {
  return kPaperDefault;
}

const std::vector<std::string>& ScenarioKeys() {
  static const auto* keys = [] {
    auto* out = new std::vector<std::string>;
    for (const auto& [name, setter] : Setters())
      out->push_back(name);
    return out;
  }();
  return *keys;
}

}  // namespace vidlink
