#ifndef RME_RME_H
#define RME_RME_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes, shared with the CLI's exit codes:
   0 = all checked properties hold, 1 = a property failed,
   2 = invalid configuration or usage. */
enum { RME_OK = 0, RME_FAIL = 1, RME_USAGE = 2 };

/* Opaque result handle; owns every string the accessors return. */
typedef struct rme_report rme_report;

/* Runs the checker described by a JSON run configuration (lock kind and
   dimensions, scheduler, budgets, bounds). On RME_OK/RME_FAIL, *out holds
   a report handle the caller must free with rme_report_free. On
   RME_USAGE, *out is NULL and rme_last_error() describes the problem. */
int rme_check(const char* config_json, rme_report** out);

/* Re-applies a recorded adversary decision list (JSON array of actions,
   as found in a report's counterexamples) under the same monitors. */
int rme_replay(const char* config_json, const char* actions_json,
               rme_report** out);

/* Scripted starvation adversary against the 4-port lock. faulty != 0
   selects the variant whose Exit promotes only after releasing. Returns
   RME_FAIL when the outcome contradicts the variant: the faulty lock let
   the parked victim into the CS (or broke mutual exclusion), or the
   correct lock starved it. */
int rme_demo_starvation(int faulty, int rounds, rme_report** out);

/* Measurement sweep: "wport", "tree", "adaptive" or "crash". The CSV is
   available through rme_report_csv. */
int rme_bench(const char* which, uint64_t seed, int runs, rme_report** out);

/* Accessors; returned strings live as long as the report handle. */
const char* rme_report_json(const rme_report* r);
const char* rme_report_csv(const rme_report* r); /* empty unless bench */
int rme_report_ok(const rme_report* r);
void rme_report_free(rme_report* r);

/* Message for the most recent RME_USAGE result on this thread. */
const char* rme_last_error(void);

#ifdef __cplusplus
}
#endif

#endif /* RME_RME_H */
