#pragma once

#include <stdexcept>
#include <vector>

namespace nsdg {

// BDF time-integration constants and the extrapolation weights.
// J=1: gamma0 = alpha0 = 1; J=2: gamma0 = 3/2, alpha = (2, -1/2).
// Extrapolation of order Jp: beta = {} (Jp=0), {1}, or {2, -1}.
struct BdfCoefficients {
  double gamma0 = 1.0;
  std::vector<double> alpha;
  std::vector<double> beta;

  static BdfCoefficients make(int J, int Jp) {
    if (J < 1 || J > 2) throw std::invalid_argument("BdfCoefficients: J must be 1 or 2");
    if (Jp < 0 || Jp > 2) throw std::invalid_argument("BdfCoefficients: Jp must be 0, 1 or 2");
    BdfCoefficients c;
    if (J == 1) {
      c.gamma0 = 1.0;
      c.alpha = {1.0};
    } else {
      c.gamma0 = 1.5;
      c.alpha = {2.0, -0.5};
    }
    if (Jp == 1)
      c.beta = {1.0};
    else if (Jp == 2)
      c.beta = {2.0, -1.0};
    return c;
  }
};

}  // namespace nsdg
