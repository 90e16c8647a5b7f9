/* Dense-orbit search over indefinite integral lattices: C interface.
 *
 * All functions returning int use the DENSEORBIT_* status codes. Strings
 * returned as char* are heap-allocated; release them with denseorbit_free.
 * Error details for the calling thread are available via
 * denseorbit_last_error until the next call.
 */
#ifndef DENSEORBIT_H
#define DENSEORBIT_H

#ifdef __cplusplus
extern "C" {
#endif

#define DENSEORBIT_OK 0           /* search succeeded / certificate accepted */
#define DENSEORBIT_ERR_PARSE 1    /* malformed or invalid input */
#define DENSEORBIT_BEST_EFFORT 2  /* search exhausted its caps; certificate is best-effort */
#define DENSEORBIT_REJECTED 3     /* certificate failed verification */
#define DENSEORBIT_ERR_INTERNAL 4 /* invariant violation inside the engine */
#define DENSEORBIT_ERR_ARG 5      /* null pointer or out-of-range argument */

typedef struct denseorbit_problem denseorbit_problem;
typedef struct denseorbit_certificate denseorbit_certificate;

/* Library version, static storage. */
const char* denseorbit_version(void);

/* Message for the most recent failure on this thread; static storage, empty
 * string when the last call succeeded. */
const char* denseorbit_last_error(void);

/* Parse a problem spec (JSON text). On success stores a handle in *out. */
int denseorbit_problem_from_json(const char* json_text, denseorbit_problem** out);
void denseorbit_problem_free(denseorbit_problem* p);

/* Run the search. Returns DENSEORBIT_OK or DENSEORBIT_BEST_EFFORT; both emit
 * a certificate into *out. */
int denseorbit_search(const denseorbit_problem* p, denseorbit_certificate** out);

int denseorbit_certificate_from_json(const char* json_text, denseorbit_certificate** out);
/* JSON text of the certificate; pretty != 0 adds indentation. */
char* denseorbit_certificate_to_json(const denseorbit_certificate* c, int pretty);
/* JSON array of the reduction pipeline stages (empty array when unused). */
char* denseorbit_certificate_trace(const denseorbit_certificate* c);

/* Re-check a certificate from scratch. Returns DENSEORBIT_OK or
 * DENSEORBIT_REJECTED; when reasons_out is non-null it receives a
 * newline-separated report (free with denseorbit_free). */
int denseorbit_verify(const denseorbit_certificate* c, char** reasons_out);
void denseorbit_certificate_free(denseorbit_certificate* c);

/* Classification of an isometry under the spec's form: "Identity",
 * "Hyperbolic theta+=... theta-=...", etc. NULL on error. */
char* denseorbit_classify(const char* spec_json);

/* CSV enumeration of the source-geodesic orbit. NULL on error. */
char* denseorbit_orbit_csv(const char* spec_json, int depth, int node_cap);

void denseorbit_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* DENSEORBIT_H */
