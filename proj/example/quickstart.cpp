// Recover camera locations from heavily corrupted directions.
#include <cstdio>

#include "cyclesync/cyclesync.hpp"

int main() {
  using namespace cyclesync;
  SyntheticScenario scn;
  scn.n = 100;
  scn.p = 0.5;
  scn.q = 0.6;  // 60% of the directions are random
  scn.seed = 1;
  const LocationScenario data = sample_scenario(scn);

  const LocationEstimate est = cycle_sync(data.graph, data.dirs, SolverConfig{});
  const AlignmentResult res = location_errors(est.locations, data.truth.locations);
  std::printf("edges %d, median error %.3g, mean error %.3g, exact %s\n", data.graph.num_edges(),
              res.median_error, res.mean_error, exact_recovery(res) ? "yes" : "no");

  const RotationScenario rot = sample_rotation_scenario(50, 0.5, 0.3, 0.0, 1);
  const RotationEstimate r = mpls_cycle(rot.graph, rot.rots);
  std::printf("rotations: median error %.3g deg\n",
              rotation_errors(r.rotations, rot.truth.rotations).median_deg);
  return 0;
}
