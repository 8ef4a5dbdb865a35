#include "kinkqr/dgp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "kinkqr/error.hpp"
#include "kinkqr/random.hpp"

namespace kinkqr {

LongitudinalDataset generate(const DgpSpec& spec) {
  if (spec.case_id < 1 || spec.case_id > 4) fail(ErrorCode::InvalidInput, "case must be 1, 2, 3 or 4");
  if (spec.N < 10) fail(ErrorCode::InvalidInput, "N must be at least 10");
  const double b1 = 1.0;
  const double b2 = spec.delta_beta ? b1 + *spec.delta_beta : -1.0;

  auto rng = make_stream(spec.seed, 0);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit10(0.0, 10.0);
  std::uniform_real_distribution<double> start(0.5, 7.5);
  std::student_t_distribution<double> t3(3.0);

  std::vector<Subject> subjects(static_cast<std::size_t>(spec.N));
  for (int i = 0; i < spec.N; ++i) {
    const int ni = i < spec.N - 2 ? 5 : (i == spec.N - 2 ? 4 : 6);
    auto& s = subjects[static_cast<std::size_t>(i)];
    s.id = "s" + std::to_string(i + 1);
    const double a = normal(rng);
    const double x1 = spec.case_id == 2 ? start(rng) : 0.0;
    double u = normal(rng) * std::sqrt(4.0 / 3.0);
    for (int j = 0; j < ni; ++j) {
      const double x = spec.case_id == 2 ? x1 + 0.5 * j : unit10(rng);
      const double z = unit10(rng);
      double e = 0.0;
      switch (spec.case_id) {
        case 1: e = a + normal(rng); break;
        case 2:
          if (j > 0) u = 0.5 * u + normal(rng);
          e = (3.2 - 0.2 * x) * u;
          break;
        case 3: {
          const double v = 3.2 - 0.2 * x;
          e = a + std::sqrt(v * v - 1.0) * normal(rng);
          break;
        }
        default: e = a + t3(rng); break;
      }
      if (spec.noiseless) e = 0.0;
      const double d = x - kTrueKink;
      const double y = 3.0 + (x <= kTrueKink ? b1 * d : b2 * d) - 0.2 * z + e;
      s.observations.push_back({y, x, {z}});
    }
  }
  return LongitudinalDataset(subjects);
}

}  // namespace kinkqr
