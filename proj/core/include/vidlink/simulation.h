#ifndef VIDLINK_SIMULATION_H_
#define VIDLINK_SIMULATION_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vidlink/metrics.h"
#include "vidlink/scenario.h"

namespace vidlink {

struct RunOutput {
  RunSummary summary;
  std::vector<FrameRecord> frames;
  std::vector<EpochRecord> epochs;
  uint64_t packets_offered = 0;
  uint64_t packets_dropped = 0;
};

// Extra time after run_length during which in-flight work is still
// processed. Frame generation stops at run_length.
inline constexpr double kDrainTime = 5.0;

// Runs one arm of `scenario` in virtual time.
//
// Events sharing a timestamp are handled in a fixed order:
//   1. link deliveries and worker completions
//   2. epoch finalization at the server
//   3. feedback delivery to the client
//   4. controller decision
//   5. frame generation and packet sending
// The result depends only on the scenario (including its seed).
RunOutput RunSim(const Scenario& scenario);

// RunSim followed by ExportRun into `out_dir`.
RunOutput RunSimAndExport(const Scenario& scenario,
                          const std::filesystem::path& out_dir);

}  // namespace vidlink

#endif  // VIDLINK_SIMULATION_H_
