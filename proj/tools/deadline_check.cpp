// Build-time guard: the max-time design must finish its largest admitted graph
// within one syndrome cycle.
#include <cstdio>

#include "gnnqec/hwsim.hpp"
#include "gnnqec/model.hpp"

int main() {
  using namespace gnnqec;
  const auto config = model::preset_config(model::Variant::MaxTime);
  const auto hw = hwsim::HardwareConfig::preset("max-time");
  const auto r = hwsim::schedule(config, hw.n_max, hw);
  const double deadline_ns = 1000.0;
  std::printf("max-time worst case: n=%d, %lld cycles, %.1f ns (deadline %.0f ns)\n", hw.n_max,
              static_cast<long long>(r.total_cycles), r.latency_ns, deadline_ns);
  if (r.latency_ns > deadline_ns) {
    std::fprintf(stderr, "deadline exceeded\n");
    return 1;
  }
  return 0;
}
