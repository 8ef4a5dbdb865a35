#pragma once

#include <string>

#include <json.hpp>

#include "kinkqr/covariance.hpp"
#include "kinkqr/intervals.hpp"
#include "kinkqr/kink_estimator.hpp"
#include "kinkqr/monte_carlo.hpp"
#include "kinkqr/rankscore.hpp"
#include "kinkqr/slr_test.hpp"

namespace kinkqr {

// Numbers leave the program with 12 significant digits, in JSON and CSV alike.
double round_number(double value);
std::string format_number(double value);

nlohmann::json number(double value);  // null for NaN or infinity
nlohmann::json to_json(const Eigen::VectorXd& v);
// {"rows": r, "cols": c, "data": [row-major values]}
nlohmann::json to_json(const Eigen::MatrixXd& m);

nlohmann::json to_json(const KinkFit& fit);
nlohmann::json to_json(const CovarianceEstimate& cov);
nlohmann::json to_json(const SlrResult& result, bool include_bootstrap = false);
nlohmann::json to_json(const RankScoreResult& result);
nlohmann::json to_json(const IntervalResult& result);
nlohmann::json to_json(const CommonalityResult& result);
nlohmann::json to_json(const McReport& report);

// Leaves of a JSON document as "path,value" lines (path segments joined by '.').
std::string flatten_to_csv(const nlohmann::json& doc);

}  // namespace kinkqr
