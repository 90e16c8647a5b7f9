#include "denseorbit.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <stdexcept>
#include <string>

#include "json_io.hpp"

using namespace denseorbit;

struct denseorbit_problem {
  LoadedProblem loaded;
};

struct denseorbit_certificate {
  Certificate cert;
};

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& msg) { g_last_error = msg; }

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Maps exceptions to status codes: invalid input is a parse error, anything
// else an internal one.
template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return DENSEORBIT_ERR_PARSE;
  } catch (const nlohmann::json::exception& e) {
    set_error(e.what());
    return DENSEORBIT_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return DENSEORBIT_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set_error(e.what());
    return DENSEORBIT_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown error");
    return DENSEORBIT_ERR_INTERNAL;
  }
}

}  // namespace

extern "C" {

const char* denseorbit_version(void) { return "0.1.0"; }

const char* denseorbit_last_error(void) { return g_last_error.c_str(); }

int denseorbit_problem_from_json(const char* json_text, denseorbit_problem** out) {
  if (!json_text || !out) {
    set_error("null argument");
    return DENSEORBIT_ERR_ARG;
  }
  *out = nullptr;
  return guarded([&]() {
    json spec = json::parse(json_text);
    auto* p = new denseorbit_problem{load_problem(spec)};
    *out = p;
    set_error("");
    return DENSEORBIT_OK;
  });
}

void denseorbit_problem_free(denseorbit_problem* p) { delete p; }

int denseorbit_search(const denseorbit_problem* p, denseorbit_certificate** out) {
  if (!p || !out) {
    set_error("null argument");
    return DENSEORBIT_ERR_ARG;
  }
  *out = nullptr;
  return guarded([&]() {
    Certificate cert;
    if (p->loaded.trivial) {
      cert = *p->loaded.trivial;
    } else {
      SearchEngine engine(p->loaded.problem, p->loaded.cfg);
      cert = engine.run();
    }
    int rc = cert.status == "ok" ? DENSEORBIT_OK : DENSEORBIT_BEST_EFFORT;
    *out = new denseorbit_certificate{std::move(cert)};
    set_error("");
    return rc;
  });
}

int denseorbit_certificate_from_json(const char* json_text, denseorbit_certificate** out) {
  if (!json_text || !out) {
    set_error("null argument");
    return DENSEORBIT_ERR_ARG;
  }
  *out = nullptr;
  return guarded([&]() {
    json j = json::parse(json_text);
    auto* c = new denseorbit_certificate{certificate_from_json(j)};
    *out = c;
    set_error("");
    return DENSEORBIT_OK;
  });
}

char* denseorbit_certificate_to_json(const denseorbit_certificate* c, int pretty) {
  if (!c) {
    set_error("null argument");
    return nullptr;
  }
  try {
    json j = certificate_to_json(c->cert);
    set_error("");
    return dup_string(pretty ? j.dump(2) : j.dump());
  } catch (const std::exception& e) {
    set_error(e.what());
    return nullptr;
  }
}

char* denseorbit_certificate_trace(const denseorbit_certificate* c) {
  if (!c) {
    set_error("null argument");
    return nullptr;
  }
  try {
    json trace = json::array();
    for (const auto& s : c->cert.trace)
      trace.push_back(json{{"stage", s.stage}, {"data", s.data}});
    set_error("");
    return dup_string(trace.dump(2));
  } catch (const std::exception& e) {
    set_error(e.what());
    return nullptr;
  }
}

int denseorbit_verify(const denseorbit_certificate* c, char** reasons_out) {
  if (reasons_out) *reasons_out = nullptr;
  if (!c) {
    set_error("null argument");
    return DENSEORBIT_ERR_ARG;
  }
  return guarded([&]() {
    VerifyResult res = verify_certificate(c->cert);
    std::string report;
    for (const auto& r : res.reasons) {
      report += r;
      report += '\n';
    }
    if (reasons_out) *reasons_out = dup_string(report);
    set_error("");
    return res.accepted ? DENSEORBIT_OK : DENSEORBIT_REJECTED;
  });
}

void denseorbit_certificate_free(denseorbit_certificate* c) { delete c; }

char* denseorbit_classify(const char* spec_json) {
  if (!spec_json) {
    set_error("null argument");
    return nullptr;
  }
  try {
    json spec = json::parse(spec_json);
    std::string s = classify_text(spec);
    set_error("");
    return dup_string(s);
  } catch (const std::exception& e) {
    set_error(e.what());
    return nullptr;
  }
}

char* denseorbit_orbit_csv(const char* spec_json, int depth, int node_cap) {
  if (!spec_json) {
    set_error("null argument");
    return nullptr;
  }
  try {
    json spec = json::parse(spec_json);
    std::string s = orbit_csv(spec, depth, node_cap);
    set_error("");
    return dup_string(s);
  } catch (const std::exception& e) {
    set_error(e.what());
    return nullptr;
  }
}

void denseorbit_free(char* s) { std::free(s); }

}  // extern "C"
