#pragma once

// Canonical JSON forms of windows, covariances and Wick polynomials.
//
// WickPoly:
//   { "format": "qlrg.wickpoly/1",
//     "modes": { "dim": d, "members": [[n_1..n_d], ...] },
//     "ordering": { "kind": "plain" }
//               | { "kind": "gaussian", "lambda": L, "profile": {...} },
//     "degree_cap": D | null, "real": bool,
//     "terms": [ [ [[n..], [n..], ...], re, im ], ... ] }   sorted by key

#include "qlrg/covariance.hpp"
#include "qlrg/modes.hpp"
#include "qlrg/wick.hpp"

#include "json.hpp"

namespace qlrg {

using json = nlohmann::json;

json to_json(const ModeSet& modes);
ModeSetPtr mode_set_from_json(const json& j);

json to_json(const CutoffProfile& profile);
CutoffProfile profile_from_json(const json& j);

json ordering_to_json(const CovariancePtr& cov);
CovariancePtr ordering_from_json(const json& j, const ModeSetPtr& modes);

json to_json(const WickPoly& p);
WickPoly wick_from_json(const json& j);

json key_to_json(const Key& key, const ModeSet& modes);
std::string key_label(const Key& key, const ModeSet& modes);

// Shortest round-trip decimal form, used for CSV output.
std::string format_double(double v);

} // namespace qlrg
