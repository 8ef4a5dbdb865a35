#pragma once

#include <cstdint>
#include <optional>

#include "kinkqr/dataset.hpp"

namespace kinkqr {

// Simulation designs with kink at t = 5:
//   y = 3 + b1 (x - 5) 1[x <= 5] + b2 (x - 5) 1[x > 5] - 0.2 z + e,
// b1 = 1, b2 = -1 unless delta_beta is set (then b2 = b1 + delta_beta).
//   case 1: e = a_i + eps,                        a_i, eps ~ N(0, 1)
//   case 2: e = (3.2 - 0.2 x) u, u AR(1) with coefficient 0.5, N(0, 1)
//           innovations and a stationary start; x_i1 ~ U(0.5, 7.5), x_ij = x_i,j-1 + 0.5
//   case 3: e = a_i + sqrt((3.2 - 0.2 x)^2 - 1) eps
//   case 4: e = a_i + t_3
// x ~ U(0, 10) outside case 2, z ~ U(0, 10). Subjects 1..N-2 have 5
// observations, subject N-1 has 4 and subject N has 6.
struct DgpSpec {
  int case_id = 1;
  int N = 200;
  std::optional<double> delta_beta;
  std::uint64_t seed = 1;
  // Zero noise, for exact-recovery checks.
  bool noiseless = false;
};

inline constexpr double kTrueKink = 5.0;

LongitudinalDataset generate(const DgpSpec& spec);

}  // namespace kinkqr
