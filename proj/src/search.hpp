#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reduction.hpp"

namespace denseorbit {

struct SearchConfig {
  int max_word_length = 20;
  int power_cap = 60;
  double epsilon = 1e-2;
  double arc_width = 0;  // 0 means epsilon / 2
  std::uint64_t rng_seed = 0;
  Int denom_bound = 10000;  // float target rationalization
  int reflection_height = 6;
  bool exhaustive = false;       // full width ladder + full candidate scan
  double fixed_point_tol = 1e-6;
  int bfs_depth = 8;
  int bfs_node_cap = 20000;
  int max_candidates = 60000;
  int orbit_node_cap = 200000;
};

// Word in the generators; letters apply right to left, so matrix equals the
// ordered product of letter matrices.
struct GroupWord {
  std::vector<std::pair<int, int>> letters;  // (generator index, exponent)
  QMat matrix;

  int length() const;
};

GroupWord identity_word(int dim);
GroupWord normalize_word(const std::vector<Generator>& gens, GroupWord w);
GroupWord word_concat(const std::vector<Generator>& gens, const GroupWord& a, const GroupWord& b);
GroupWord word_inverse(const std::vector<Generator>& gens, const GroupWord& w);
GroupWord word_power(const std::vector<Generator>& gens, const GroupWord& w, int n);
// Product of the generator lifts along the word (identity of size dim for the
// empty word).
QMat word_lift(const std::vector<Generator>& gens, const GroupWord& w, int dim);
std::string word_to_string(const GroupWord& w);

struct OrbitEntry {
  GroupWord word;
  Geodesic geodesic;
};
// Breadth-first orbit of a geodesic, deduplicated by plane, deterministic
// order (word length, then generator index, inverse after direct).
std::vector<OrbitEntry> orbit_bfs(const HyperbolicProblem& p, const Geodesic& seed, int max_len,
                                  int node_cap);

struct Certificate {
  std::string kind;  // "plane" or "geodesic"
  QMat gram;
  std::vector<QMat> generators;
  std::vector<std::string> provenance;
  QVec l;
  std::vector<QVec> target;
  std::vector<std::pair<int, int>> word;
  QMat gamma;
  std::vector<QVec> achieved;
  double distance = 0;
  double epsilon = 0;
  std::uint64_t seed = 0;
  std::string status;  // "ok" or "best-effort"
  std::vector<TraceStage> trace;
};

struct VerifyResult {
  bool accepted = false;
  std::vector<std::string> reasons;
};
VerifyResult verify_certificate(const Certificate& c);

class SearchEngine {
 public:
  SearchEngine(HyperbolicProblem p, SearchConfig cfg);

  const HyperbolicProblem& problem() const { return p_; }
  const KleinFrame& frame() const { return frame_; }
  const SearchConfig& config() const { return cfg_; }

  // Deduplicated group elements in breadth-first order.
  const std::vector<GroupWord>& elements();

  struct FixCandidate {
    GroupWord word;
    ClassifiedIsometry cls;
  };
  // Parabolic/hyperbolic words with their fixed boundary data, ordered by
  // word length. Grown lazily in tiers: 0 = products of at most two letters
  // (plane-stabilizer elements live here), 1 = every enumerated word,
  // 2 = conjugated copies. Asking for a tier builds it and everything below.
  const std::vector<FixCandidate>& fixing_candidates(int tier = 2);

  struct FixResult {
    GroupWord word;  // oriented so the matched point attracts
    ClassifiedIsometry cls;
    BoundaryPoint fixed;
  };
  std::optional<FixResult> find_fixing_element(double arc_center, double arc_width);

  // Word moving both points off the fixed set of gamma; empty word when they
  // are already clear.
  std::optional<GroupWord> avoid_fixed_points(const ClassifiedIsometry& gamma,
                                              const BoundaryPoint& u1, const BoundaryPoint& u2);

  struct BoundaryApprox {
    bool ok = false;
    GroupWord word;          // gamma'
    Geodesic moved;          // gamma'(source)
    BoundaryPoint reflected; // reflection of v across moved
    double achieved = 0;     // boundary distance to v_target
    int power_n = 0;
    std::string note;
  };
  // Move gprime so that reflecting v across the moved geodesic lands within
  // the arc around v_target. With no width given, runs its own schedule.
  BoundaryApprox approximate_boundary(const BoundaryPoint& v, const BoundaryPoint& v_target,
                                      const Geodesic& gprime, std::optional<double> width);

  Certificate run();  // dispatches on the norm of l3

 private:
  struct AchievedCandidate {
    bool ok = false;
    GroupWord word;
    Subspace achieved3;   // rational plane in the reduced coordinates
    double distance = 0;  // certificate metric
    std::string note;
  };

  Certificate approximate_plane();
  Certificate isotropic_orbit_case();
  Certificate interior_point_case();
  AchievedCandidate build_achieved(const GroupWord& word, const QVec& exact_member,
                                   const BoundaryPoint& witness);
  AchievedCandidate build_achieved_span(const GroupWord& word, const QVec& exact_member,
                                        const QVec& second);
  Certificate finalize(const AchievedCandidate& c, const std::string& status);
  Certificate trivial_certificate();
  std::vector<double> width_ladder() const;
  QVec rationalize_ray(const BoundaryPoint& b) const;

  HyperbolicProblem p_;
  SearchConfig cfg_;
  KleinFrame frame_;
  std::vector<GroupWord> elements_;
  bool elements_done_ = false;
  void grow_candidates(int tier);
  std::vector<FixCandidate> candidates_;
  int candidate_tier_ = -1;
  std::map<std::string, char> candidate_seen_;
};

}  // namespace denseorbit
