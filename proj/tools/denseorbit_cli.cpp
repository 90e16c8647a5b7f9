// Command-line front end over the public C API: search, verify, classify,
// orbit. Certificates go to stdout (or --output); diagnostics to stderr.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "denseorbit.h"

namespace {

using json = nlohmann::ordered_json;

std::optional<std::string> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << content;
  return bool(out);
}

void check_thread_cap() {
  const char* env = std::getenv("DENSEORBIT_THREADS");
  if (!env) return;
  char* end = nullptr;
  long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1)
    std::cerr << "warning: ignoring DENSEORBIT_THREADS='" << env
              << "' (expected a positive integer)\n";
  // The engine is currently single-threaded, so any valid cap is honored.
}

struct SearchFlags {
  std::string spec_path;
  std::string output;
  std::string trace_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<int> max_word;
  std::optional<int> power_cap;
  std::optional<std::string> denom_bound;
  std::optional<double> arc_width;
  bool exhaustive = false;
  bool compact = false;
};

int run_search(const SearchFlags& f) {
  auto text = read_file(f.spec_path);
  if (!text) {
    std::cerr << "error: cannot read " << f.spec_path << "\n";
    return 1;
  }
  json spec;
  try {
    spec = json::parse(*text);
  } catch (const json::exception& e) {
    std::cerr << "error: " << f.spec_path << ": " << e.what() << "\n";
    return 1;
  }
  if (!spec.is_object()) {
    std::cerr << "error: " << f.spec_path << ": spec must be a JSON object\n";
    return 1;
  }
  if (!f.preset.empty()) {
    spec.erase("lattice");
    spec["preset"] = f.preset;
  }
  if (f.seed) spec["seed"] = *f.seed;
  if (f.epsilon) spec["epsilon"] = *f.epsilon;
  auto cfg = [&]() -> json& {
    if (!spec.contains("config") || !spec["config"].is_object()) spec["config"] = json::object();
    return spec["config"];
  };
  if (f.max_word) cfg()["max_word_length"] = *f.max_word;
  if (f.power_cap) cfg()["power_cap"] = *f.power_cap;
  if (f.denom_bound) cfg()["denom_bound"] = *f.denom_bound;
  if (f.arc_width) cfg()["arc_width"] = *f.arc_width;
  if (f.exhaustive) cfg()["exhaustive"] = true;

  denseorbit_problem* prob = nullptr;
  int rc = denseorbit_problem_from_json(spec.dump().c_str(), &prob);
  if (rc != DENSEORBIT_OK) {
    std::cerr << "error: " << denseorbit_last_error() << "\n";
    return 1;
  }
  denseorbit_certificate* cert = nullptr;
  rc = denseorbit_search(prob, &cert);
  denseorbit_problem_free(prob);
  if (rc != DENSEORBIT_OK && rc != DENSEORBIT_BEST_EFFORT) {
    std::cerr << "error: " << denseorbit_last_error() << "\n";
    return 1;
  }
  char* text_out = denseorbit_certificate_to_json(cert, f.compact ? 0 : 1);
  if (!text_out) {
    std::cerr << "error: " << denseorbit_last_error() << "\n";
    denseorbit_certificate_free(cert);
    return 1;
  }
  std::string cert_json(text_out);
  denseorbit_free(text_out);
  cert_json += '\n';
  if (!f.trace_path.empty()) {
    char* trace = denseorbit_certificate_trace(cert);
    bool ok = trace && write_file(f.trace_path, std::string(trace) + "\n");
    denseorbit_free(trace);
    if (!ok) {
      std::cerr << "error: cannot write trace to " << f.trace_path << "\n";
      denseorbit_certificate_free(cert);
      return 1;
    }
  }
  denseorbit_certificate_free(cert);
  if (!f.output.empty()) {
    if (!write_file(f.output, cert_json)) {
      std::cerr << "error: cannot write " << f.output << "\n";
      return 1;
    }
  } else {
    std::cout << cert_json;
  }
  if (rc == DENSEORBIT_BEST_EFFORT) {
    std::cerr << "search exhausted its caps; certificate is best-effort\n";
    return 2;
  }
  return 0;
}

int run_verify(const std::string& path) {
  auto text = read_file(path);
  if (!text) {
    std::cerr << "error: cannot read " << path << "\n";
    return 1;
  }
  denseorbit_certificate* cert = nullptr;
  int rc = denseorbit_certificate_from_json(text->c_str(), &cert);
  if (rc != DENSEORBIT_OK) {
    std::cerr << "error: " << denseorbit_last_error() << "\n";
    return 1;
  }
  char* reasons = nullptr;
  rc = denseorbit_verify(cert, &reasons);
  denseorbit_certificate_free(cert);
  if (reasons && *reasons) std::cerr << reasons;
  denseorbit_free(reasons);
  if (rc == DENSEORBIT_OK) {
    std::cerr << "certificate accepted\n";
    return 0;
  }
  if (rc == DENSEORBIT_REJECTED) {
    std::cerr << "certificate rejected\n";
    return 3;
  }
  std::cerr << "error: " << denseorbit_last_error() << "\n";
  return 1;
}

int run_classify(const std::string& spec_path, const std::string& preset,
                 const std::string& matrix) {
  json spec;
  if (!spec_path.empty()) {
    auto text = read_file(spec_path);
    if (!text) {
      std::cerr << "error: cannot read " << spec_path << "\n";
      return 1;
    }
    try {
      spec = json::parse(*text);
    } catch (const json::exception& e) {
      std::cerr << "error: " << spec_path << ": " << e.what() << "\n";
      return 1;
    }
  } else {
    spec = json::object();
  }
  if (!preset.empty()) {
    spec.erase("lattice");
    spec["preset"] = preset;
  }
  if (!matrix.empty()) {
    try {
      spec["matrix"] = json::parse(matrix);
    } catch (const json::exception& e) {
      std::cerr << "error: --matrix: " << e.what() << "\n";
      return 1;
    }
  }
  char* out = denseorbit_classify(spec.dump().c_str());
  if (!out) {
    std::cerr << "error: " << denseorbit_last_error() << "\n";
    return 1;
  }
  std::cout << out << "\n";
  denseorbit_free(out);
  return 0;
}

int run_orbit(const std::string& spec_path, int depth, int node_cap, const std::string& output) {
  auto text = read_file(spec_path);
  if (!text) {
    std::cerr << "error: cannot read " << spec_path << "\n";
    return 1;
  }
  char* csv = denseorbit_orbit_csv(text->c_str(), depth, node_cap);
  if (!csv) {
    std::cerr << "error: " << denseorbit_last_error() << "\n";
    return 1;
  }
  std::string body(csv);
  denseorbit_free(csv);
  if (!output.empty()) {
    if (!write_file(output, body)) {
      std::cerr << "error: cannot write " << output << "\n";
      return 1;
    }
  } else {
    std::cout << body;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  check_thread_cap();
  CLI::App app{std::string("dense-orbit search over indefinite lattices (library ") +
               denseorbit_version() + ")"};
  app.require_subcommand(1);

  SearchFlags sf;
  auto* search = app.add_subcommand("search", "run the density search on a problem spec");
  search->add_option("spec", sf.spec_path, "problem spec (JSON)")->required();
  search->add_option("--seed", sf.seed, "override the spec's seed");
  search->add_option("--epsilon", sf.epsilon, "override the spec's epsilon");
  search->add_option("--max-word", sf.max_word, "override config.max_word_length");
  search->add_option("--power-cap", sf.power_cap, "override config.power_cap");
  search->add_option("--denom-bound", sf.denom_bound, "override config.denom_bound");
  search->add_option("--arc-width", sf.arc_width, "override config.arc_width");
  search->add_option("--preset", sf.preset, "override the spec's lattice with a preset");
  search->add_option("--trace", sf.trace_path, "write the reduction trace JSON here");
  search->add_option("--output,-o", sf.output, "write the certificate here instead of stdout");
  search->add_flag("--exhaustive", sf.exhaustive, "scan the full candidate ladder");
  search->add_flag("--compact", sf.compact, "single-line certificate JSON");

  std::string verify_path;
  auto* verify = app.add_subcommand("verify", "re-check a certificate from scratch");
  verify->add_option("certificate", verify_path, "certificate file (JSON)")->required();

  std::string cls_spec, cls_preset, cls_matrix;
  auto* classify = app.add_subcommand("classify", "classify an isometry of a (2,1) form");
  classify->add_option("spec", cls_spec, "spec with 'lattice'/'preset' and 'matrix'");
  classify->add_option("--preset", cls_preset, "lattice preset name");
  classify->add_option("--matrix", cls_matrix, "3x3 matrix as inline JSON");

  std::string orbit_spec, orbit_out;
  int orbit_depth = 4, orbit_cap = 100000;
  auto* orbit = app.add_subcommand("orbit", "CSV of the source-geodesic orbit");
  orbit->add_option("spec", orbit_spec, "problem spec (JSON)")->required();
  orbit->add_option("--depth", orbit_depth, "maximum word length");
  orbit->add_option("--node-cap", orbit_cap, "maximum number of geodesics");
  orbit->add_option("--output,-o", orbit_out, "write the CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  if (search->parsed()) return run_search(sf);
  if (verify->parsed()) return run_verify(verify_path);
  if (classify->parsed()) return run_classify(cls_spec, cls_preset, cls_matrix);
  if (orbit->parsed()) return run_orbit(orbit_spec, orbit_depth, orbit_cap, orbit_out);
  return 1;
}
