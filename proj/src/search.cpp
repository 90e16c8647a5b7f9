#include "search.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <sstream>
#include <stdexcept>

namespace denseorbit {

namespace {

QMat qmat_pow(const QMat& m, int n) {
  if (n < 0) return qmat_pow(inverse(m), -n);
  QMat acc = QMat::identity(m.rows);
  QMat base = m;
  while (n > 0) {
    if (n & 1) acc = acc * base;
    base = base * base;
    n >>= 1;
  }
  return acc;
}

BoundaryPoint transform_point(const KleinFrame& f, const QMat& m, const BoundaryPoint& p) {
  if (p.exact) return f.boundary_point(m * *p.exact);
  auto mf = f.frame_action(m);
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i)
    r[i] = mf[3 * i] * p.ray[0] + mf[3 * i + 1] * p.ray[1] + mf[3 * i + 2] * p.ray[2];
  return f.boundary_point_from_frame(r);
}

// Generators with entries this large (unit automorphs of big discriminants)
// are kept out of exact product chains: concatenating them freely would blow
// up every entry in the enumeration. They still enter as standalone words.
constexpr size_t kHeavyEntryBits = 2000;

size_t matrix_bits(const QMat& m) {
  size_t mx = 0;
  for (const auto& x : m.a) {
    mx = std::max(mx, mpz_sizeinbase(x.get_num().get_mpz_t(), 2));
    mx = std::max(mx, mpz_sizeinbase(x.get_den().get_mpz_t(), 2));
  }
  return mx;
}

}  // namespace

// --- words ---------------------------------------------------------------------

int GroupWord::length() const {
  int n = 0;
  for (const auto& [g, e] : letters) n += std::abs(e);
  return n;
}

GroupWord identity_word(int dim) {
  GroupWord w;
  w.matrix = QMat::identity(dim);
  return w;
}

GroupWord normalize_word(const std::vector<Generator>& gens, GroupWord w) {
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<std::pair<int, int>> out;
    for (const auto& [g, e0] : w.letters) {
      int e = e0;
      if (g >= 0 && g < static_cast<int>(gens.size()) && gens[g].involution) {
        e = ((e % 2) + 2) % 2;  // involution: only parity matters
        if (e0 != e) changed = true;
      }
      if (e == 0) {
        changed = true;
        continue;
      }
      if (!out.empty() && out.back().first == g) {
        out.back().second += e;
        changed = true;
        if (out.back().second == 0) out.pop_back();
      } else {
        out.push_back({g, e});
      }
    }
    w.letters = std::move(out);
  }
  return w;
}

GroupWord word_concat(const std::vector<Generator>& gens, const GroupWord& a, const GroupWord& b) {
  GroupWord w;
  w.letters = a.letters;
  w.letters.insert(w.letters.end(), b.letters.begin(), b.letters.end());
  w.matrix = a.matrix * b.matrix;
  return normalize_word(gens, std::move(w));
}

GroupWord word_inverse(const std::vector<Generator>& gens, const GroupWord& w) {
  GroupWord out;
  out.letters.reserve(w.letters.size());
  for (auto it = w.letters.rbegin(); it != w.letters.rend(); ++it)
    out.letters.push_back({it->first, -it->second});
  out.matrix = inverse(w.matrix);
  return normalize_word(gens, std::move(out));
}

GroupWord word_power(const std::vector<Generator>& gens, const GroupWord& w, int n) {
  GroupWord out;
  out.matrix = qmat_pow(w.matrix, n);
  if (n != 0) {
    const GroupWord& base = n > 0 ? w : word_inverse(gens, w);
    for (int i = 0; i < std::abs(n); ++i)
      out.letters.insert(out.letters.end(), base.letters.begin(), base.letters.end());
  }
  return normalize_word(gens, std::move(out));
}

QMat word_lift(const std::vector<Generator>& gens, const GroupWord& w, int dim) {
  QMat acc = QMat::identity(dim);
  for (const auto& [g, e] : w.letters) {
    if (g < 0 || g >= static_cast<int>(gens.size())) throw std::out_of_range("word letter index");
    acc = acc * qmat_pow(gens[g].lift, e);
  }
  return acc;
}

std::string word_to_string(const GroupWord& w) {
  if (w.letters.empty()) return "e";
  std::ostringstream os;
  for (size_t i = 0; i < w.letters.size(); ++i) {
    if (i) os << "*";
    os << "g" << w.letters[i].first;
    if (w.letters[i].second != 1) os << "^" << w.letters[i].second;
  }
  return os.str();
}

// --- orbit ---------------------------------------------------------------------

std::vector<OrbitEntry> orbit_bfs(const HyperbolicProblem& p, const Geodesic& seed, int max_len,
                                  int node_cap) {
  std::vector<OrbitEntry> out;
  std::vector<char> heavy(p.generators.size(), 0);
  for (size_t g = 0; g < p.generators.size(); ++g)
    heavy[g] = matrix_bits(p.generators[g].mat3) > kHeavyEntryBits;
  std::map<std::string, bool> seen;
  std::deque<OrbitEntry> queue;
  OrbitEntry root{identity_word(3), seed};
  seen[seed.plane.to_string()] = true;
  out.push_back(root);
  queue.push_back(std::move(root));
  while (!queue.empty() && static_cast<int>(out.size()) < node_cap) {
    OrbitEntry cur = queue.front();
    queue.pop_front();
    if (cur.word.length() >= max_len) continue;
    for (size_t g = 0; g < p.generators.size(); ++g) {
      if (heavy[g]) continue;
      for (int e : {1, -1}) {
        if (e == -1 && p.generators[g].involution) continue;
        GroupWord step;
        step.letters = {{static_cast<int>(g), e}};
        step.matrix = e == 1 ? p.generators[g].mat3 : inverse(p.generators[g].mat3);
        GroupWord next = word_concat(p.generators, cur.word, step);
        Geodesic moved = transform_geodesic(p.space3, cur.geodesic, next.matrix);
        std::string key = moved.plane.to_string();
        if (seen.count(key)) continue;
        seen[key] = true;
        OrbitEntry entry{std::move(next), std::move(moved)};
        out.push_back(entry);
        queue.push_back(std::move(entry));
        if (static_cast<int>(out.size()) >= node_cap) break;
      }
      if (static_cast<int>(out.size()) >= node_cap) break;
    }
  }
  return out;
}

// --- engine ----------------------------------------------------------------------

SearchEngine::SearchEngine(HyperbolicProblem p, SearchConfig cfg)
    : p_(std::move(p)), cfg_(cfg), frame_(p_.space3) {
  if (p_.generators.empty()) throw std::invalid_argument("search needs at least one generator");
}

const std::vector<GroupWord>& SearchEngine::elements() {
  if (elements_done_) return elements_;
  int depth = std::min(cfg_.bfs_depth, cfg_.max_word_length);
  std::vector<char> heavy(p_.generators.size(), 0);
  for (size_t g = 0; g < p_.generators.size(); ++g)
    heavy[g] = matrix_bits(p_.generators[g].mat3) > kHeavyEntryBits;
  std::map<std::string, bool> seen;
  std::deque<GroupWord> queue;
  GroupWord id = identity_word(3);
  seen[matrix_to_string(id.matrix)] = true;
  elements_.push_back(id);
  queue.push_back(id);
  while (!queue.empty() && static_cast<int>(elements_.size()) < cfg_.bfs_node_cap) {
    GroupWord cur = queue.front();
    queue.pop_front();
    if (cur.length() >= depth) continue;
    for (size_t g = 0; g < p_.generators.size(); ++g) {
      if (heavy[g]) continue;
      for (int e : {1, -1}) {
        if (e == -1 && p_.generators[g].involution) continue;
        GroupWord step;
        step.letters = {{static_cast<int>(g), e}};
        step.matrix = e == 1 ? p_.generators[g].mat3 : inverse(p_.generators[g].mat3);
        GroupWord next = word_concat(p_.generators, cur, step);
        std::string key = matrix_to_string(next.matrix);
        if (seen.count(key)) continue;
        seen[key] = true;
        elements_.push_back(next);
        queue.push_back(std::move(next));
        if (static_cast<int>(elements_.size()) >= cfg_.bfs_node_cap) break;
      }
      if (static_cast<int>(elements_.size()) >= cfg_.bfs_node_cap) break;
    }
  }
  // Heavy generators enter as bare one-letter words only.
  for (size_t g = 0; g < p_.generators.size(); ++g) {
    if (!heavy[g]) continue;
    for (int e : {1, -1}) {
      if (e == -1 && p_.generators[g].involution) continue;
      GroupWord w;
      w.letters = {{static_cast<int>(g), e}};
      w.matrix = e == 1 ? p_.generators[g].mat3 : inverse(p_.generators[g].mat3);
      std::string key = matrix_to_string(w.matrix);
      if (seen.count(key)) continue;
      seen[key] = true;
      elements_.push_back(std::move(w));
    }
  }
  elements_done_ = true;
  return elements_;
}

void SearchEngine::grow_candidates(int tier) {
  // Keep one representative per matrix. Heavy matrices get their word as the
  // key instead: stringifying the matrix itself would dominate the pass, and
  // a rare duplicate candidate is harmless.
  auto key_of = [](const GroupWord& w) {
    return matrix_bits(w.matrix) > kHeavyEntryBits ? "w:" + word_to_string(w)
                                                   : matrix_to_string(w.matrix);
  };
  auto admit = [&](const GroupWord& w, std::vector<FixCandidate>& out) {
    if (w.letters.empty() || w.length() > cfg_.max_word_length) return;
    if (!candidate_seen_.emplace(key_of(w), 1).second) return;
    try {
      ClassifiedIsometry cls = classify_isometry(frame_, w.matrix);
      if (cls.cls == IsometryClass::Hyperbolic || cls.cls == IsometryClass::Parabolic)
        out.push_back({w, std::move(cls)});
    } catch (const std::logic_error&) {
      // numerically degenerate fixed-point extraction: drop the candidate
    }
  };
  auto merge = [&](std::vector<FixCandidate>&& fresh) {
    candidates_.insert(candidates_.end(), std::make_move_iterator(fresh.begin()),
                       std::make_move_iterator(fresh.end()));
    std::stable_sort(candidates_.begin(), candidates_.end(),
                     [](const FixCandidate& a, const FixCandidate& b) {
                       return a.word.length() < b.word.length();
                     });
  };

  if (candidate_tier_ < 0 && tier >= 0) {
    // Products of at most two letters, straight from the generators. The
    // plane-stabilizer elements land here, so most arcs stop at this tier.
    std::vector<GroupWord> letters;
    for (size_t g = 0; g < p_.generators.size(); ++g) {
      for (int e : {1, -1}) {
        if (e == -1 && p_.generators[g].involution) continue;
        GroupWord w;
        w.letters = {{static_cast<int>(g), e}};
        w.matrix = e == 1 ? p_.generators[g].mat3 : inverse(p_.generators[g].mat3);
        letters.push_back(std::move(w));
      }
    }
    std::vector<FixCandidate> fresh;
    for (const auto& w : letters) admit(w, fresh);
    for (const auto& a : letters) {
      if (matrix_bits(a.matrix) > kHeavyEntryBits) continue;
      for (const auto& b : letters) {
        if (matrix_bits(b.matrix) > kHeavyEntryBits) continue;
        admit(word_concat(p_.generators, a, b), fresh);
      }
    }
    merge(std::move(fresh));
    candidate_tier_ = 0;
  }

  if (candidate_tier_ < 1 && tier >= 1) {
    const auto& els = elements();
    std::vector<FixCandidate> fresh;
    for (size_t i = 1; i < els.size(); ++i) admit(els[i], fresh);
    merge(std::move(fresh));
    candidate_tier_ = 1;
  }

  if (candidate_tier_ < 2 && tier >= 2) {
    // Conjugated copies move the fixed points around the circle.
    constexpr int kMaxBases = 12;
    constexpr int kMaxConjugators = 4000;
    constexpr int kBaseLengthCap = 6;
    std::vector<FixCandidate> bases;
    for (const auto& c : candidates_) {
      if (c.word.length() <= kBaseLengthCap) bases.push_back(c);
      if (static_cast<int>(bases.size()) >= kMaxBases) break;
    }
    const auto& els = elements();
    std::vector<FixCandidate> fresh;
    for (const FixCandidate& b : bases) {
      int wcount = 0;
      for (size_t i = 1; i < els.size() && wcount < kMaxConjugators; ++i) {
        const GroupWord& w = els[i];
        if (matrix_bits(w.matrix) > kHeavyEntryBits) continue;  // no heavy conjugators
        int total = 2 * w.length() + b.word.length();
        if (total > cfg_.max_word_length) continue;
        ++wcount;
        try {
          GroupWord winv = word_inverse(p_.generators, w);
          GroupWord cand = word_concat(p_.generators, word_concat(p_.generators, w, b.word), winv);
          if (cand.letters.empty()) continue;
          if (!candidate_seen_.emplace(key_of(cand), 1).second) continue;
          ClassifiedIsometry cls;
          cls.cls = b.cls.cls;
          cls.trace = b.cls.trace;
          cls.frame = frame_.frame_action(cand.matrix);
          if (b.cls.attractor) cls.attractor = transform_point(frame_, w.matrix, *b.cls.attractor);
          if (b.cls.repeller) cls.repeller = transform_point(frame_, w.matrix, *b.cls.repeller);
          fresh.push_back({std::move(cand), std::move(cls)});
        } catch (const std::logic_error&) {
          continue;
        }
        if (static_cast<int>(fresh.size() + candidates_.size()) >= cfg_.max_candidates) break;
      }
      if (static_cast<int>(fresh.size() + candidates_.size()) >= cfg_.max_candidates) break;
    }
    merge(std::move(fresh));
    candidate_tier_ = 2;
  }
}

const std::vector<SearchEngine::FixCandidate>& SearchEngine::fixing_candidates(int tier) {
  grow_candidates(std::clamp(tier, 0, 2));
  return candidates_;
}

std::optional<SearchEngine::FixResult> SearchEngine::find_fixing_element(double arc_center,
                                                                         double arc_width) {
  // Escalate tiers only while nothing lands in the arc; rescanning the
  // earlier candidates is cheap next to building a tier.
  for (int tier = 0; tier <= 2; ++tier) {
    for (const auto& cand : fixing_candidates(tier)) {
      if (cand.cls.attractor &&
          angle_distance(cand.cls.attractor->theta, arc_center) < arc_width)
        return FixResult{cand.word, cand.cls, *cand.cls.attractor};
      if (cand.cls.cls == IsometryClass::Hyperbolic && cand.cls.repeller &&
          angle_distance(cand.cls.repeller->theta, arc_center) < arc_width) {
        try {
          GroupWord inv = word_inverse(p_.generators, cand.word);
          ClassifiedIsometry cls = classify_isometry(frame_, inv.matrix);
          if (cls.cls != IsometryClass::Hyperbolic || !cls.attractor) continue;
          return FixResult{std::move(inv), cls, *cls.attractor};
        } catch (const std::logic_error&) {
          continue;
        }
      }
    }
  }
  return std::nullopt;
}

std::optional<GroupWord> SearchEngine::avoid_fixed_points(const ClassifiedIsometry& gamma,
                                                          const BoundaryPoint& u1,
                                                          const BoundaryPoint& u2) {
  std::vector<double> fixed;
  if (gamma.attractor) fixed.push_back(gamma.attractor->theta);
  if (gamma.repeller) fixed.push_back(gamma.repeller->theta);
  auto clear = [&](const BoundaryPoint& b) {
    for (double t : fixed)
      if (angle_distance(b.theta, t) <= cfg_.fixed_point_tol) return false;
    return true;
  };
  if (clear(u1) && clear(u2)) return identity_word(3);
  const auto& els = elements();
  constexpr int kScanCap = 2000;
  int scanned = 0;
  for (size_t i = 1; i < els.size() && scanned < kScanCap; ++i) {
    ++scanned;
    try {
      BoundaryPoint v1 = transform_point(frame_, els[i].matrix, u1);
      BoundaryPoint v2 = transform_point(frame_, els[i].matrix, u2);
      if (clear(v1) && clear(v2)) return els[i];
    } catch (const std::logic_error&) {
      continue;
    }
  }
  return std::nullopt;
}

std::vector<double> SearchEngine::width_ladder() const {
  if (cfg_.exhaustive) return {0.1, 0.05, 0.02, 0.01, 0.005, 0.002};
  double w0 = cfg_.arc_width > 0 ? cfg_.arc_width : cfg_.epsilon / 2;
  return {w0, w0 / 2, w0 / 4, w0 / 8, 2 * w0, 4 * w0};
}

SearchEngine::BoundaryApprox SearchEngine::approximate_boundary(const BoundaryPoint& v,
                                                                const BoundaryPoint& v_target,
                                                                const Geodesic& gprime,
                                                                std::optional<double> width) {
  BoundaryApprox out;
  std::vector<double> schedule = width ? std::vector<double>{*width} : width_ladder();
  double sep = angle_distance(v.theta, v_target.theta);
  if (sep < 1e-13) {
    out.note = "start and target coincide";
    return out;
  }

  // The source may already reflect v onto the target.
  try {
    BoundaryPoint r0 = reflect_boundary_point(frame_, v, gprime);
    double d0 = boundary_distance(r0, v_target);
    if (d0 < schedule.front()) {
      out.ok = true;
      out.word = identity_word(3);
      out.moved = gprime;
      out.reflected = r0;
      out.achieved = d0;
      out.power_n = 0;
      return out;
    }
  } catch (const std::domain_error&) {
  }

  auto [u1_0, u2_0] = endpoints(frame_, gprime);
  for (double w : schedule) {
    double weff = std::min(w, 0.45 * sep);
    if (weff < 1e-13) continue;
    auto fix = find_fixing_element(v_target.theta, weff);
    if (!fix) continue;

    BoundaryPoint u1 = u1_0, u2 = u2_0;
    GroupWord gamma0 = identity_word(3);
    try {
      std::vector<double> fixed;
      if (fix->cls.attractor) fixed.push_back(fix->cls.attractor->theta);
      if (fix->cls.repeller) fixed.push_back(fix->cls.repeller->theta);
      auto near_fixed = [&](const BoundaryPoint& b) {
        for (double t : fixed)
          if (angle_distance(b.theta, t) <= cfg_.fixed_point_tol) return true;
        return false;
      };
      if (near_fixed(u1) || near_fixed(u2)) {
        auto g0 = avoid_fixed_points(fix->cls, u1, u2);
        if (!g0) continue;
        gamma0 = *g0;
        u1 = transform_point(frame_, gamma0.matrix, u1);
        u2 = transform_point(frame_, gamma0.matrix, u2);
      }
    } catch (const std::logic_error&) {
      continue;
    }

    // Drive both endpoints of the moved source into the arc.
    std::array<double, 3> r1 = u1.ray, r2 = u2.ray;
    int found_n = 0;
    for (int n = 1; n <= cfg_.power_cap; ++n) {
      auto step = [&](std::array<double, 3>& r) {
        std::array<double, 3> s{};
        for (int i = 0; i < 3; ++i)
          s[i] = fix->cls.frame[3 * i] * r[0] + fix->cls.frame[3 * i + 1] * r[1] +
                 fix->cls.frame[3 * i + 2] * r[2];
        if (s[2] < 0)
          for (auto& x : s) x = -x;
        if (s[2] != 0)
          for (auto& x : s) x /= s[2];
        r = s;
      };
      step(r1);
      step(r2);
      double t1 = wrap_angle(std::atan2(r1[1], r1[0]));
      double t2 = wrap_angle(std::atan2(r2[1], r2[0]));
      if (angle_distance(t1, v_target.theta) < weff &&
          angle_distance(t2, v_target.theta) < weff) {
        found_n = n;
        break;
      }
    }
    if (!found_n) continue;

    GroupWord gp = word_concat(p_.generators, word_power(p_.generators, fix->word, found_n),
                               gamma0);
    Geodesic moved = transform_geodesic(p_.space3, gprime, gp.matrix);
    BoundaryPoint reflected;
    try {
      reflected = reflect_boundary_point(frame_, v, moved);
    } catch (const std::domain_error&) {
      continue;
    }
    out.ok = true;
    out.word = std::move(gp);
    out.moved = std::move(moved);
    out.reflected = reflected;
    out.achieved = boundary_distance(reflected, v_target);
    out.power_n = found_n;
    return out;
  }
  out.note = "no fixing element reached the target arc";
  return out;
}

// --- achieved plane construction ----------------------------------------------------

QVec SearchEngine::rationalize_ray(const BoundaryPoint& b) const {
  if (b.exact) return primitive_vector(*b.exact);
  std::array<double, 3> vs = frame_.from_frame(b.ray);
  double scale = std::max({std::fabs(vs[0]), std::fabs(vs[1]), std::fabs(vs[2])});
  if (scale == 0) throw std::logic_error("zero boundary ray");
  static const Int kBound("1000000000");
  QVec v(3);
  for (int i = 0; i < 3; ++i) v[i] = rat_from_double(vs[i] / scale, kBound);
  return v;
}

SearchEngine::AchievedCandidate SearchEngine::build_achieved(const GroupWord& word,
                                                             const QVec& exact_member,
                                                             const BoundaryPoint& witness) {
  return build_achieved_span(word, exact_member, rationalize_ray(witness));
}

SearchEngine::AchievedCandidate SearchEngine::build_achieved_span(const GroupWord& word,
                                                                  const QVec& exact_member,
                                                                  const QVec& second) {
  AchievedCandidate out;
  out.word = word;
  Subspace a = Subspace::span(3, {exact_member, second});
  if (a.rank() != 2) {
    out.note = "witness degenerate with the carried vector";
    return out;
  }
  Signature sig = signature_on(p_.space3, a);
  if (!(sig == Signature{1, 1, 0})) {
    out.note = "achieved plane has signature " + sig.to_string();
    return out;
  }
  out.achieved3 = a;
  if (!p_.ctx) {
    out.distance = plane_distance(a, p_.target.plane);
  } else {
    const auto& ctx = *p_.ctx;
    std::vector<QVec> bu;
    for (const auto& b : a.basis) bu.push_back(ctx.embed_3U * b);
    Subspace span_u = Subspace::span(4, bu);
    Subspace achieved_u = orthogonal_complement(ctx.U, span_u);
    if (achieved_u.rank() != 2 || !(signature_on(ctx.U, achieved_u) == Signature{2, 0, 0})) {
      out.note = "dual plane not positive definite";
      return out;
    }
    std::vector<QVec> bv;
    for (const auto& b : achieved_u.basis) bv.push_back(ctx.embed_U * b);
    out.distance = plane_distance(Subspace::span(ctx.V.dim, bv), ctx.target);
  }
  out.ok = true;
  return out;
}

Certificate SearchEngine::finalize(const AchievedCandidate& c, const std::string& status) {
  Certificate cert;
  cert.word = c.word.letters;
  cert.distance = c.distance;
  cert.epsilon = cfg_.epsilon;
  cert.seed = cfg_.rng_seed;
  cert.status = status;
  for (const auto& g : p_.generators) cert.provenance.push_back(g.provenance);
  if (!p_.ctx) {
    cert.kind = "geodesic";
    cert.gram = p_.space3.gram;
    for (const auto& g : p_.generators) cert.generators.push_back(g.mat3);
    cert.l = p_.l3;
    cert.target = p_.target.plane.basis;
    cert.gamma = c.word.matrix;
    cert.achieved = c.achieved3.basis;
  } else {
    const auto& ctx = *p_.ctx;
    cert.kind = "plane";
    cert.gram = ctx.V.gram;
    for (const auto& g : p_.generators) cert.generators.push_back(g.lift);
    cert.l = ctx.l;
    cert.target = ctx.target.basis;
    cert.gamma = word_lift(p_.generators, c.word, ctx.V.dim);
    // The two routes to gamma(l) must agree exactly.
    QVec via3 = ctx.embed_3V * (c.word.matrix * p_.l3);
    QVec viaV = cert.gamma * ctx.l;
    if (!(via3 == viaV)) throw std::logic_error("lift of the reduced word is inconsistent");
    std::vector<QVec> bu;
    for (const auto& b : c.achieved3.basis) bu.push_back(ctx.embed_3U * b);
    Subspace span_u = Subspace::span(4, bu);
    Subspace achieved_u = orthogonal_complement(ctx.U, span_u);
    std::vector<QVec> bv;
    for (const auto& b : achieved_u.basis) bv.push_back(ctx.embed_U * b);
    cert.achieved = Subspace::span(ctx.V.dim, bv).basis;
    cert.trace = ctx.trace;
  }
  return cert;
}

Certificate SearchEngine::trivial_certificate() {
  AchievedCandidate c;
  c.ok = true;
  c.word = identity_word(3);
  c.achieved3 = p_.target.plane;
  c.distance = 0;
  if (p_.ctx) {
    // Lift the target back up and measure it against the original plane.
    const auto& ctx = *p_.ctx;
    std::vector<QVec> bu;
    for (const auto& b : p_.target.plane.basis) bu.push_back(ctx.embed_3U * b);
    Subspace achieved_u = orthogonal_complement(ctx.U, Subspace::span(4, bu));
    std::vector<QVec> bv;
    for (const auto& b : achieved_u.basis) bv.push_back(ctx.embed_U * b);
    c.distance = plane_distance(Subspace::span(ctx.V.dim, bv), ctx.target);
  }
  return finalize(c, "ok");
}

// --- flavors -----------------------------------------------------------------------

Certificate SearchEngine::approximate_plane() {
  if (p_.target.plane.contains(p_.l3)) return trivial_certificate();
  if (!p_.source) throw std::logic_error("positive flavor needs a source geodesic");
  auto [e1, e2] = endpoints(frame_, p_.target);
  std::array<std::pair<BoundaryPoint, BoundaryPoint>, 2> orders{
      std::make_pair(e1, e2), std::make_pair(e2, e1)};

  std::optional<AchievedCandidate> best;
  auto consider = [&](const AchievedCandidate& c) {
    if (c.ok && (!best || c.distance < best->distance)) best = c;
  };

  for (double w : width_ladder()) {
    for (const auto& [v, vt] : orders) {
      BoundaryApprox res = approximate_boundary(v, vt, *p_.source, w);
      if (!res.ok) continue;
      consider(build_achieved(res.word, res.word.matrix * p_.l3, v));
      if (!cfg_.exhaustive && best && best->distance <= cfg_.epsilon)
        return finalize(*best, "ok");
    }
  }
  if (best && best->distance <= cfg_.epsilon) return finalize(*best, "ok");
  for (const auto& [v, vt] : orders) consider(build_achieved(identity_word(3), p_.l3, v));
  if (!best) throw std::runtime_error("no admissible plane could be constructed");
  return finalize(*best, "best-effort");
}

Certificate SearchEngine::isotropic_orbit_case() {
  if (p_.target.plane.contains(p_.l3)) return trivial_certificate();
  auto [a, b] = endpoints(frame_, p_.target);

  std::optional<AchievedCandidate> best;
  auto consider = [&](const AchievedCandidate& c) {
    if (c.ok && (!best || c.distance < best->distance)) best = c;
  };

  struct OrbitNode {
    GroupWord word;
    QVec vec;  // primitive isotropic
    double theta;
  };
  std::map<std::string, bool> seen;
  std::deque<OrbitNode> queue;
  QVec l0 = primitive_vector(p_.l3);
  OrbitNode root{identity_word(3), l0, frame_.boundary_point(l0).theta};
  seen[vec_to_string(l0)] = true;
  queue.push_back(root);

  double best_arc[2] = {1e9, 1e9};  // per assignment: (keep=a,move=b), (keep=b,move=a)
  const std::array<std::pair<const BoundaryPoint*, const BoundaryPoint*>, 2> assigns{
      std::make_pair(&a, &b), std::make_pair(&b, &a)};

  int visited = 0;
  while (!queue.empty() && visited < cfg_.orbit_node_cap) {
    OrbitNode cur = queue.front();
    queue.pop_front();
    ++visited;
    for (int s = 0; s < 2; ++s) {
      const auto& [keep, move] = assigns[s];
      double d = angle_distance(cur.theta, move->theta);
      if (d < best_arc[s] * 0.999 || d < 1e-9) {
        best_arc[s] = std::min(best_arc[s], d);
        consider(build_achieved(cur.word, cur.vec, *keep));
        if (!cfg_.exhaustive && best && best->distance <= cfg_.epsilon)
          return finalize(*best, "ok");
      }
    }
    if (cur.word.length() >= cfg_.max_word_length) continue;
    for (size_t g = 0; g < p_.generators.size(); ++g) {
      for (int e : {1, -1}) {
        if (e == -1 && p_.generators[g].involution) continue;
        GroupWord step;
        step.letters = {{static_cast<int>(g), e}};
        step.matrix = e == 1 ? p_.generators[g].mat3 : inverse(p_.generators[g].mat3);
        GroupWord next = word_concat(p_.generators, cur.word, step);
        QVec img = primitive_vector(next.matrix * l0);
        std::string key = vec_to_string(img);
        if (seen.count(key)) continue;
        seen[key] = true;
        queue.push_back({std::move(next), img, frame_.boundary_point(img).theta});
      }
    }
  }
  if (best && best->distance <= cfg_.epsilon) return finalize(*best, "ok");
  for (const auto& [keep, move] : assigns) consider(build_achieved(identity_word(3), l0, *keep));
  if (!best) throw std::runtime_error("no admissible plane could be constructed");
  return finalize(*best, "best-effort");
}

Certificate SearchEngine::interior_point_case() {
  if (p_.target.plane.contains(p_.l3)) return trivial_certificate();
  auto [a, b] = endpoints(frame_, p_.target);
  // Two chords of the frame disc are parallel exactly when their planes meet
  // inside the frame's spacelike coordinate plane, so that intersection ray
  // plus the moved point spans the parallel chord with no rounding at all.
  const QMat& S = frame_.diagonalizer();
  Subspace ker_phi = Subspace::span(3, {S.col(0), S.col(1)});
  Subspace dir_space = subspace_intersect(p_.target.plane, ker_phi);
  if (dir_space.rank() != 1) throw std::logic_error("target chord degenerate");
  QVec dir = primitive_vector(dir_space.basis[0]);

  std::optional<AchievedCandidate> best;
  auto consider = [&](const AchievedCandidate& c) {
    if (c.ok && (!best || c.distance < best->distance)) best = c;
  };

  auto chord_candidate = [&](const GroupWord& word, const QVec& vec) {
    consider(build_achieved_span(word, vec, dir));
  };

  chord_candidate(identity_word(3), p_.l3);
  for (const BoundaryPoint* e : {&a, &b}) {
    for (double w : width_ladder()) {
      auto fix = find_fixing_element(e->theta, w);
      if (!fix) continue;
      if (proportional(fix->word.matrix * p_.l3, p_.l3)) continue;
      QVec vec = p_.l3;
      for (int n = 1; n <= cfg_.power_cap; ++n) {
        vec = fix->word.matrix * vec;
        chord_candidate(word_power(p_.generators, fix->word, n), vec);
        if (!cfg_.exhaustive && best && best->distance <= cfg_.epsilon)
          return finalize(*best, "ok");
      }
    }
  }
  if (best && best->distance <= cfg_.epsilon) return finalize(*best, "ok");
  if (!best) throw std::runtime_error("no admissible plane could be constructed");
  return finalize(*best, "best-effort");
}

Certificate SearchEngine::run() {
  Rat nn = norm2(p_.space3, p_.l3);
  if (nn > 0) return approximate_plane();
  if (nn == 0) return isotropic_orbit_case();
  return interior_point_case();
}

// --- verification -------------------------------------------------------------------

VerifyResult verify_certificate(const Certificate& c) {
  VerifyResult res;
  res.accepted = true;
  auto reject = [&](const std::string& why) {
    res.accepted = false;
    res.reasons.push_back(why);
  };
  auto note = [&](const std::string& what) { res.reasons.push_back(what); };

  int n = c.gram.rows;
  if (n == 0 || c.gram.cols != n || !is_symmetric(c.gram)) {
    reject("gram matrix missing or not symmetric");
    return res;
  }
  QuadraticSpace space(n, c.gram);
  if (static_cast<int>(c.l.size()) != n) {
    reject("vector l has the wrong dimension");
    return res;
  }
  if (is_zero_vec(c.l)) reject("vector l is zero");
  if (c.kind != "plane" && c.kind != "geodesic") reject("unknown certificate kind: " + c.kind);
  if (c.status != "ok" && c.status != "best-effort") reject("unknown status: " + c.status);
  if (!(c.epsilon > 0)) reject("epsilon must be positive");

  for (size_t i = 0; i < c.generators.size(); ++i) {
    const QMat& g = c.generators[i];
    if (g.rows != n || g.cols != n) {
      reject("generator " + std::to_string(i) + " has the wrong shape");
      return res;
    }
    if (!is_integer_matrix(g)) reject("generator " + std::to_string(i) + " is not integral");
    if (!is_isometry(space, g)) reject("generator " + std::to_string(i) + " is not an isometry");
  }

  // (a) The word must multiply out to gamma.
  QMat prod = QMat::identity(n);
  for (const auto& [g, e] : c.word) {
    if (g < 0 || g >= static_cast<int>(c.generators.size())) {
      reject("word references generator " + std::to_string(g) + " out of range");
      return res;
    }
    prod = prod * qmat_pow(c.generators[g], e);
  }
  if (!(prod == c.gamma)) reject("word product does not equal gamma");

  // (b) gamma is an integral isometry.
  if (c.gamma.rows != n || c.gamma.cols != n) {
    reject("gamma has the wrong shape");
    return res;
  }
  if (!is_integer_matrix(c.gamma)) reject("gamma is not integral");
  if (!is_isometry(space, c.gamma)) reject("gamma is not an isometry of the form");
  Rat det = determinant(c.gamma);
  if (!(det == 1 || det == -1)) reject("gamma does not have determinant +-1");

  auto make_plane = [&](const std::vector<QVec>& rows, const std::string& name,
                        std::optional<Subspace>& out) {
    for (const auto& r : rows)
      if (static_cast<int>(r.size()) != n) {
        reject(name + " has a vector of the wrong dimension");
        return;
      }
    Subspace s = Subspace::span(n, rows);
    if (s.rank() != 2) {
      reject(name + " does not span a plane");
      return;
    }
    out = s;
  };
  std::optional<Subspace> target, achieved;
  make_plane(c.target, "target", target);
  make_plane(c.achieved, "achieved plane", achieved);
  if (!target || !achieved) return res;

  Signature want = c.kind == "plane" ? Signature{2, 0, 0} : Signature{1, 1, 0};
  if (!(signature_on(space, *target) == want))
    reject("target plane has signature " + signature_on(space, *target).to_string());
  if (!(signature_on(space, *achieved) == want))
    reject("achieved plane has signature " + signature_on(space, *achieved).to_string());

  // (c) Exact relation between the achieved plane and gamma(l).
  QVec gl = c.gamma * c.l;
  if (c.kind == "plane") {
    for (const auto& bvec : achieved->basis)
      if (inner(space, bvec, gl) != 0) {
        reject("achieved plane is not orthogonal to gamma(l)");
        break;
      }
  } else {
    if (!achieved->contains(gl)) reject("achieved plane does not contain gamma(l)");
  }

  // (e) Distance bookkeeping.
  double d = plane_distance(*achieved, *target);
  if (std::fabs(d - c.distance) > 1e-6 * std::max(1.0, std::fabs(c.distance)))
    reject("recorded distance does not match the achieved plane");
  if (c.status == "ok") {
    if (d > c.epsilon + 1e-9)
      reject("distance " + std::to_string(d) + " exceeds epsilon " + std::to_string(c.epsilon));
  } else {
    note("best-effort certificate: distance " + std::to_string(d));
  }
  return res;
}

}  // namespace denseorbit
