#pragma once

#include <cmath>
#include <stdexcept>

namespace kmt {

// The (R, sigma) assumption: Y in [0,R] a.s. with Var(Y) = sigma^2.
// Popoviciu forces sigma <= R/2, which also keeps R_s real.
struct BoundedModel {
  double R;
  double sigma;
  double R_s;        // (R + sqrt(R^2 - 4 sigma^2)) / 2, a.s. bound on |Y - EY|
  double tildeR;     // R / sigma
  double tildeR_s;   // R_s / sigma

  BoundedModel(double range, double std_dev) : R(range), sigma(std_dev) {
    if (!(R > 0.0)) throw std::domain_error("BoundedModel: R must be positive");
    if (!(sigma > 0.0)) throw std::domain_error("BoundedModel: sigma must be positive");
    if (sigma > R / 2.0 + 1e-12 * R)
      throw std::domain_error("BoundedModel: sigma must satisfy sigma <= R/2");
    const double disc = std::max(0.0, R * R - 4.0 * sigma * sigma);
    R_s = 0.5 * (R + std::sqrt(disc));
    tildeR = R / sigma;
    tildeR_s = R_s / sigma;
  }
};

}  // namespace kmt
