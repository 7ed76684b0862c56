// Polarization across the ground-state anticrossing, printed as CSV.
//   demo_gslac_sweep [pump_rate_MHz] [backend]

#include <iostream>
#include <string>

#include "lacsim/polarization.hpp"

int main(int argc, char** argv) {
  lacsim::SystemParams p;
  if (argc > 1) p.pump_rate = std::stod(argv[1]);
  const auto method = lacsim::parse_steady_state_method(argc > 2 ? argv[2] : "secular");

  const auto ac = lacsim::find_anticrossing(p, lacsim::Manifold::ground, 100.0, 150.0);
  std::cerr << "GSLAC at " << ac.b_star << " mT, gap " << ac.gap << " MHz\n";

  const auto curve = lacsim::sweep_polarization(p, lacsim::field_grid(100.0, 150.0, 1.0), method);
  lacsim::write_polarization_csv(std::cout, curve);
}
