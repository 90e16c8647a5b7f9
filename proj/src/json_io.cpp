#include "json_io.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace denseorbit {

namespace {

const Int kDoubleExact("9007199254740992");  // 2^53

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown field '" + it.key() + "' in " + where);
}

double require_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw std::invalid_argument("field '" + field + "' must be a number");
  return j.get<double>();
}

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

}  // namespace

json int_to_json(const Int& v) {
  if (abs(v) <= kDoubleExact) return json(mpz_get_si(v.get_mpz_t()));
  return json(v.get_str());
}

json rat_to_json(const Rat& r) {
  if (r.get_den() == 1) return int_to_json(r.get_num());
  return json(rat_to_string(r));
}

Rat rat_from_json(const json& j) {
  if (j.is_number_integer()) return Rat(static_cast<long>(j.get<std::int64_t>()));
  if (j.is_number_unsigned()) return Rat(Int(std::to_string(j.get<std::uint64_t>())));
  if (j.is_number_float()) {
    double d = j.get<double>();
    if (!std::isfinite(d)) throw std::invalid_argument("non-finite number in rational position");
    return Rat(d);  // exact binary expansion
  }
  if (j.is_string()) return rat_from_string(j.get<std::string>());
  throw std::invalid_argument("expected a rational (number or \"p/q\" string)");
}

json vec_to_json(const QVec& v) {
  json out = json::array();
  for (const auto& x : v) out.push_back(rat_to_json(x));
  return out;
}

QVec vec_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a non-empty vector");
  QVec out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(rat_from_json(x));
  return out;
}

json mat_to_json(const QMat& m) {
  json out = json::array();
  for (int i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (int k = 0; k < m.cols; ++k) row.push_back(rat_to_json(m.at(i, k)));
    out.push_back(std::move(row));
  }
  return out;
}

QMat mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected a matrix (array of rows)");
  std::vector<QVec> rows;
  for (const auto& r : j) rows.push_back(vec_from_json(r));
  for (const auto& r : rows)
    if (r.size() != rows.front().size()) throw std::invalid_argument("ragged matrix rows");
  return QMat::from_rows(rows);
}

// --- certificates -------------------------------------------------------------------

json certificate_to_json(const Certificate& c) {
  json j = json::object();
  j["gram"] = mat_to_json(c.gram);
  json gens = json::array();
  for (const auto& g : c.generators) gens.push_back(mat_to_json(g));
  j["generators"] = std::move(gens);
  j["l"] = vec_to_json(c.l);
  json tgt = json::array();
  for (const auto& t : c.target) tgt.push_back(vec_to_json(t));
  j["target"] = std::move(tgt);
  json word = json::array();
  for (const auto& [g, e] : c.word) word.push_back(json::array({g, e}));
  j["word"] = std::move(word);
  j["gamma"] = mat_to_json(c.gamma);
  json ach = json::array();
  for (const auto& a : c.achieved) ach.push_back(vec_to_json(a));
  j["achieved_plane"] = std::move(ach);
  j["distance"] = c.distance;
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  j["status"] = c.status;
  j["kind"] = c.kind;
  j["provenance"] = c.provenance;
  json trace = json::array();
  for (const auto& s : c.trace) trace.push_back(json{{"stage", s.stage}, {"data", s.data}});
  j["trace"] = std::move(trace);
  return j;
}

Certificate certificate_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("certificate must be a JSON object");
  for (const char* key : {"gram", "generators", "l", "target", "gamma", "achieved_plane",
                          "distance", "epsilon", "status"})
    if (!j.contains(key))
      throw std::invalid_argument(std::string("certificate is missing field '") + key + "'");
  Certificate c;
  c.gram = mat_from_json(j.at("gram"));
  for (const auto& g : j.at("generators")) c.generators.push_back(mat_from_json(g));
  c.l = vec_from_json(j.at("l"));
  for (const auto& t : j.at("target")) c.target.push_back(vec_from_json(t));
  if (j.contains("word")) {
    for (const auto& w : j.at("word")) {
      if (!w.is_array() || w.size() != 2)
        throw std::invalid_argument("word letters must be [generator, exponent] pairs");
      c.word.push_back({w[0].get<int>(), w[1].get<int>()});
    }
  }
  c.gamma = mat_from_json(j.at("gamma"));
  for (const auto& a : j.at("achieved_plane")) c.achieved.push_back(vec_from_json(a));
  c.distance = require_number(j.at("distance"), "distance");
  c.epsilon = require_number(j.at("epsilon"), "epsilon");
  c.seed = j.value("seed", std::uint64_t{0});
  c.status = j.at("status").get<std::string>();
  if (j.contains("kind")) {
    c.kind = j.at("kind").get<std::string>();
  } else {
    // Documented schema omits the kind; infer it from the target signature.
    QuadraticSpace space(c.gram.rows, c.gram);
    Subspace t = Subspace::span(c.gram.rows, c.target);
    c.kind = signature_on(space, t) == Signature{1, 1, 0} ? "geodesic" : "plane";
  }
  if (j.contains("provenance"))
    for (const auto& p : j.at("provenance")) c.provenance.push_back(p.get<std::string>());
  if (j.contains("trace"))
    for (const auto& s : j.at("trace"))
      c.trace.push_back({s.at("stage").get<std::string>(), s.value("data", json::object())});
  return c;
}

// --- problem specs ------------------------------------------------------------------

namespace {

struct ParsedSpace {
  QuadraticSpace V;  // lattice coordinates
  std::vector<QMat> explicit_gens;
  std::vector<std::string> explicit_provenance;
  bool gens_from_preset = false;
};

// "preset" or inline "lattice" {gram, basis?, generators?}; everything except
// gram+basis is in lattice coordinates.
ParsedSpace parse_space(const json& spec) {
  ParsedSpace out;
  bool has_preset = spec.contains("preset"), has_lattice = spec.contains("lattice");
  if (has_preset == has_lattice)
    throw std::invalid_argument("spec needs exactly one of 'preset' or 'lattice'");
  if (has_preset) {
    if (!spec.at("preset").is_string())
      throw std::invalid_argument("field 'preset' must be a string");
    Preset p = preset(spec.at("preset").get<std::string>());
    out.V = QuadraticSpace(p.lattice.rank(), p.lattice.gram_on_basis());
    for (const auto& g : p.generators) {
      out.explicit_gens.push_back(qmat_from_zmat(g.on_lattice));
      out.explicit_provenance.push_back(g.provenance);
    }
    out.gens_from_preset = true;
    return out;
  }
  const json& lat = spec.at("lattice");
  if (!lat.is_object()) throw std::invalid_argument("field 'lattice' must be an object");
  check_keys(lat, {"dim", "gram", "basis", "generators"}, "'lattice'");
  if (!lat.contains("gram")) throw std::invalid_argument("field 'lattice.gram' is required");
  QMat gram = mat_from_json(lat.at("gram"));
  if (gram.rows != gram.cols) throw std::invalid_argument("'lattice.gram' must be square");
  if (lat.contains("dim") && lat.at("dim").get<int>() != gram.rows)
    throw std::invalid_argument("'lattice.dim' does not match the gram matrix");
  if (lat.contains("basis")) {
    std::vector<QVec> basis;
    for (const auto& b : lat.at("basis")) basis.push_back(vec_from_json(b));
    QMat bm = QMat::from_cols(basis);
    if (bm.rows != gram.rows || bm.cols != gram.rows)
      throw std::invalid_argument("'lattice.basis' must be a full basis of the ambient space");
    gram = transpose(bm) * gram * bm;  // Gram in lattice coordinates
  }
  out.V = QuadraticSpace(gram.rows, gram);
  if (lat.contains("generators")) {
    int k = 0;
    for (const auto& g : lat.at("generators")) {
      out.explicit_gens.push_back(mat_from_json(g));
      out.explicit_provenance.push_back("user generator " + std::to_string(k++));
    }
  }
  return out;
}

Certificate make_trivial_plane_certificate(const QuadraticSpace& v, const QVec& l,
                                           const Subspace& target, double epsilon,
                                           std::uint64_t seed) {
  Certificate c;
  c.kind = "plane";
  c.gram = v.gram;
  c.l = l;
  c.target = target.basis;
  c.gamma = QMat::identity(v.dim);
  c.achieved = target.basis;
  c.distance = 0;
  c.epsilon = epsilon;
  c.seed = seed;
  c.status = "ok";
  c.trace.push_back({"trivial", json{{"note", "target is orthogonal to l; the identity works"}}});
  return c;
}

}  // namespace

LoadedProblem load_problem(const json& spec) {
  if (!spec.is_object()) throw std::invalid_argument("problem spec must be a JSON object");
  check_keys(spec, {"preset", "lattice", "l", "target", "epsilon", "seed", "config"}, "spec");
  ParsedSpace ps = parse_space(spec);
  const QuadraticSpace& V = ps.V;
  int n = V.dim;

  Signature sig = signature(V);
  if (sig.minus != 1 || sig.zero != 0 || sig.plus < 2)
    throw std::invalid_argument("the form must have signature (n-1, 1) with n >= 3, got " +
                                sig.to_string());

  SearchConfig cfg;
  if (spec.contains("config")) {
    const json& c = spec.at("config");
    if (!c.is_object()) throw std::invalid_argument("field 'config' must be an object");
    check_keys(c,
               {"max_word_length", "power_cap", "arc_width", "denom_bound", "reflection_height",
                "exhaustive", "fixed_point_tol", "bfs_depth", "bfs_node_cap", "max_candidates",
                "orbit_node_cap"},
               "'config'");
    cfg.max_word_length = c.value("max_word_length", cfg.max_word_length);
    cfg.power_cap = c.value("power_cap", cfg.power_cap);
    cfg.arc_width = c.value("arc_width", cfg.arc_width);
    if (c.contains("denom_bound")) {
      Rat b = rat_from_json(c.at("denom_bound"));
      if (b.get_den() != 1 || b <= 0)
        throw std::invalid_argument("'config.denom_bound' must be a positive integer");
      cfg.denom_bound = b.get_num();
    }
    cfg.reflection_height = c.value("reflection_height", cfg.reflection_height);
    cfg.exhaustive = c.value("exhaustive", cfg.exhaustive);
    cfg.fixed_point_tol = c.value("fixed_point_tol", cfg.fixed_point_tol);
    cfg.bfs_depth = c.value("bfs_depth", cfg.bfs_depth);
    cfg.bfs_node_cap = c.value("bfs_node_cap", cfg.bfs_node_cap);
    cfg.max_candidates = c.value("max_candidates", cfg.max_candidates);
    cfg.orbit_node_cap = c.value("orbit_node_cap", cfg.orbit_node_cap);
  }
  double epsilon = 1e-2;
  if (spec.contains("epsilon")) epsilon = require_number(spec.at("epsilon"), "epsilon");
  if (!(epsilon > 0)) throw std::invalid_argument("field 'epsilon' must be positive");
  cfg.epsilon = epsilon;
  if (spec.contains("seed")) cfg.rng_seed = spec.at("seed").get<std::uint64_t>();

  if (!spec.contains("l")) throw std::invalid_argument("field 'l' is required");
  QVec l = vec_from_json(spec.at("l"));
  if (static_cast<int>(l.size()) != n)
    throw std::invalid_argument("field 'l' must have dimension " + std::to_string(n));
  if (is_zero_vec(l)) throw std::invalid_argument("field 'l' must be nonzero");
  for (const auto& x : l)
    if (x.get_den() != 1)
      throw std::invalid_argument("field 'l' must be an integral lattice vector");

  if (!spec.contains("target")) throw std::invalid_argument("field 'target' is required");
  const json& tj = spec.at("target");
  if (!tj.is_object())
    throw std::invalid_argument("field 'target' must be an object with one of "
                                "'basis', 'basis_float', 'normal'");
  check_keys(tj, {"basis", "basis_float", "normal"}, "'target'");
  if (tj.size() != 1)
    throw std::invalid_argument("field 'target' needs exactly one of 'basis', 'basis_float', "
                                "'normal'");
  Signature want = n == 3 ? Signature{1, 1, 0} : Signature{2, 0, 0};
  Subspace target;
  double input_distance = 0;
  bool float_target = false;
  if (tj.contains("basis")) {
    std::vector<QVec> rows;
    for (const auto& r : tj.at("basis")) rows.push_back(vec_from_json(r));
    for (const auto& r : rows)
      if (static_cast<int>(r.size()) != n)
        throw std::invalid_argument("'target.basis' vectors must have dimension " +
                                    std::to_string(n));
    target = Subspace::span(n, rows);
    if (target.rank() != 2) throw std::invalid_argument("'target.basis' must span a plane");
  } else if (tj.contains("normal")) {
    if (n != 3)
      throw std::invalid_argument("'target.normal' is only meaningful in dimension 3");
    QVec nrm = vec_from_json(tj.at("normal"));
    if (static_cast<int>(nrm.size()) != 3)
      throw std::invalid_argument("'target.normal' must have dimension 3");
    if (!(norm2(V, nrm) > 0))
      throw std::invalid_argument("'target.normal' must be a positive vector");
    target = orthogonal_complement(V, Subspace::span(3, {nrm}));
  } else {
    float_target = true;
    std::vector<std::vector<double>> rows;
    for (const auto& r : tj.at("basis_float")) {
      std::vector<double> row;
      for (const auto& x : r) row.push_back(require_number(x, "target.basis_float"));
      if (static_cast<int>(row.size()) != n)
        throw std::invalid_argument("'target.basis_float' vectors must have dimension " +
                                    std::to_string(n));
      rows.push_back(std::move(row));
    }
    if (rows.size() != 2)
      throw std::invalid_argument("'target.basis_float' must have exactly two vectors");
    // A float target's budget: a third of epsilon goes to rationalization, a
    // third to the search.
    Int bound = cfg.denom_bound < Int("1000000000") ? Int("1000000000") : cfg.denom_bound;
    RationalizedPlane rp = rationalize_plane(V, rows, bound, want);
    if (rp.distance > epsilon / 3)
      throw std::invalid_argument("'target.basis_float' cannot be rationalized within epsilon/3");
    target = rp.plane;
    input_distance = rp.distance;
    cfg.epsilon = epsilon / 3;
  }
  if (!(signature_on(V, target) == want))
    throw std::invalid_argument("target plane must have signature " + want.to_string() +
                                ", got " + signature_on(V, target).to_string());

  LoadedProblem out;
  out.cfg = cfg;

  Lattice L(V, QMat::identity(n).col_list());
  if (n == 3) {
    HyperbolicProblem prob;
    prob.space3 = V;
    prob.lattice3 = L;
    prob.l3 = l;
    if (norm2(V, l) > 0) prob.source = geodesic_from_normal(V, l);
    prob.target = geodesic_from_plane(V, target);
    if (!ps.explicit_gens.empty()) {
      for (size_t i = 0; i < ps.explicit_gens.size(); ++i) {
        const QMat& m = ps.explicit_gens[i];
        if (m.rows != 3 || m.cols != 3)
          throw std::invalid_argument("generator " + std::to_string(i) + " must be 3x3");
        if (!is_integer_matrix(m) || !is_integral_isometry(L, m))
          throw std::invalid_argument("generator " + std::to_string(i) +
                                      " is not an integral isometry of the form");
        Generator g;
        g.mat3 = m;
        g.lift = m;
        g.provenance = ps.explicit_provenance[i];
        g.involution = m * m == QMat::identity(3);
        prob.generators.push_back(std::move(g));
      }
    } else {
      DescentConfig dcfg;
      dcfg.denom_bound = cfg.denom_bound;
      dcfg.reflection_height = cfg.reflection_height;
      prob.generators = harvest_generators(V, L, QMat::identity(3), l, dcfg,
                                           &prob.target.normal);
      if (prob.generators.size() < 2)
        throw std::invalid_argument(
            "could not harvest enough integral isometries; pass explicit generators");
    }
    out.problem = std::move(prob);
    return out;
  }

  // Higher-dimensional input: check for the trivial family member, then reduce.
  bool orthogonal = true;
  for (const auto& t : target.basis)
    if (inner(V, t, l) != 0) {
      orthogonal = false;
      break;
    }
  if (orthogonal) {
    out.trivial = make_trivial_plane_certificate(V, l, target, cfg.epsilon, cfg.rng_seed);
    return out;
  }
  if (!(norm2(V, l) > 0))
    throw std::invalid_argument(
        "non-positive l is supported only for signature (2,1) inputs; "
        "in higher dimensions the reduction needs <l,l> > 0");
  // Preset generator lists act on the full lattice and are replaced by the
  // reflections harvested on the reduced rank-3 lattice.
  if (!ps.explicit_gens.empty() && !ps.gens_from_preset)
    throw std::invalid_argument(
        "explicit generators are only supported for dimension-3 problems; "
        "higher dimensions harvest reflections during the reduction");
  DescentConfig dcfg;
  dcfg.denom_bound = cfg.denom_bound;
  dcfg.reflection_height = cfg.reflection_height;
  out.problem = descend(V, L, l, target, dcfg);
  if (float_target && out.problem.ctx)
    out.problem.ctx->target_input_distance = input_distance;
  return out;
}

Certificate run_search(const json& spec) {
  LoadedProblem lp = load_problem(spec);
  if (lp.trivial) return *lp.trivial;
  SearchEngine engine(std::move(lp.problem), lp.cfg);
  return engine.run();
}

std::string classify_text(const json& spec) {
  if (!spec.is_object()) throw std::invalid_argument("classify spec must be a JSON object");
  check_keys(spec, {"preset", "lattice", "matrix"}, "spec");
  ParsedSpace ps = parse_space(spec);
  if (ps.V.dim != 3 || !(signature(ps.V) == Signature{2, 1, 0}))
    throw std::invalid_argument("classification needs a signature (2,1) form");
  if (!spec.contains("matrix")) throw std::invalid_argument("field 'matrix' is required");
  QMat m = mat_from_json(spec.at("matrix"));
  if (m.rows != 3 || m.cols != 3) throw std::invalid_argument("'matrix' must be 3x3");
  if (!is_isometry(ps.V, m))
    throw std::invalid_argument("'matrix' is not an isometry of the form");
  KleinFrame frame(ps.V);
  ClassifiedIsometry cls = classify_isometry(frame, m);
  switch (cls.cls) {
    case IsometryClass::Identity:
      return "Identity";
    case IsometryClass::OrientationReversing:
      return "OrientationReversing trace=" + fmt("%.6f", cls.trace);
    case IsometryClass::Elliptic: {
      std::string s = "Elliptic trace=" + fmt("%.6f", cls.trace);
      if (cls.interior_fixed)
        s += " center=(" + fmt("%.6f", cls.interior_fixed->x) + ", " +
             fmt("%.6f", cls.interior_fixed->y) + ")";
      return s;
    }
    case IsometryClass::Parabolic:
      return "Parabolic theta=" + fmt("%.6f", cls.attractor ? cls.attractor->theta : 0.0);
    case IsometryClass::Hyperbolic:
      return "Hyperbolic theta+=" + fmt("%.6f", cls.attractor ? cls.attractor->theta : 0.0) +
             " theta-=" + fmt("%.6f", cls.repeller ? cls.repeller->theta : 0.0);
  }
  return "Unknown";
}

std::string orbit_csv(const json& spec, int depth, int node_cap) {
  if (depth < 0) throw std::invalid_argument("orbit depth must be >= 0");
  LoadedProblem lp = load_problem(spec);
  if (lp.trivial || !lp.problem.source)
    throw std::invalid_argument("orbit enumeration needs a source geodesic (<l,l> > 0 "
                                "and a non-orthogonal target)");
  KleinFrame frame(lp.problem.space3);
  auto entries = orbit_bfs(lp.problem, *lp.problem.source, depth, node_cap);
  std::ostringstream os;
  os << "word_length,word,theta1,theta2,distance_to_target\n";
  for (const auto& e : entries) {
    auto ends = endpoints(frame, e.geodesic);
    double d = plane_distance(e.geodesic.plane, lp.problem.target.plane);
    os << e.word.length() << "," << word_to_string(e.word) << "," << fmt("%.12g", ends[0].theta)
       << "," << fmt("%.12g", ends[1].theta) << "," << fmt("%.12g", d) << "\n";
  }
  return os.str();
}

}  // namespace denseorbit
