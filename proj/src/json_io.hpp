#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "search.hpp"

namespace denseorbit {

using json = nlohmann::ordered_json;

// Integers stay JSON numbers while they fit exactly in a double; larger
// values become decimal strings. Non-integers serialize as "p/q".
json int_to_json(const Int& v);
json rat_to_json(const Rat& r);
Rat rat_from_json(const json& j);

json vec_to_json(const QVec& v);
QVec vec_from_json(const json& j);
json mat_to_json(const QMat& m);
QMat mat_from_json(const json& j);

json certificate_to_json(const Certificate& c);
Certificate certificate_from_json(const json& j);

// Fully resolved search problem: reduced three-dimensional data plus engine
// configuration, or an immediately decided certificate when the target is
// orthogonal to l in a higher-dimensional space.
struct LoadedProblem {
  HyperbolicProblem problem;
  SearchConfig cfg;
  std::optional<Certificate> trivial;
};

// Parses and validates a problem spec; throws std::invalid_argument naming
// the offending field.
LoadedProblem load_problem(const json& spec);

Certificate run_search(const json& spec);

// "Identity", "Hyperbolic theta+=... theta-=...", etc. for the matrix under
// the spec's form.
std::string classify_text(const json& spec);

// CSV of the source-geodesic orbit: word_length, word, theta1, theta2,
// distance_to_target.
std::string orbit_csv(const json& spec, int depth, int node_cap);

}  // namespace denseorbit
