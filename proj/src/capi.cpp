#include "rme/rme.h"

#include <algorithm>
#include <string>

#include "bench.hpp"
#include "config.hpp"
#include "scenario.hpp"

using namespace rme;

struct rme_report {
  std::string json;
  std::string csv;
  bool ok = true;
};

namespace {

thread_local std::string g_last_error;

int usage(const std::string& msg, rme_report** out) {
  g_last_error = msg;
  if (out) *out = nullptr;
  return RME_USAGE;
}

int deliver(rme_report&& r, rme_report** out) {
  if (!out) return RME_USAGE;
  int rc = r.ok ? RME_OK : RME_FAIL;
  *out = new rme_report(std::move(r));
  return rc;
}

void absorb(Report& agg, const Report& r) {
  agg.ok = agg.ok && r.ok;
  for (const Failure& f : r.failures) agg.merge_failure(f);
  agg.states += r.states;
  agg.dedup_hits += r.dedup_hits;
  agg.actions += r.actions;
  agg.sps_completed += r.sps_completed;
  agg.max_passage_cc = std::max(agg.max_passage_cc, r.max_passage_cc);
  agg.max_passage_dsm = std::max(agg.max_passage_dsm, r.max_passage_dsm);
  for (auto& [f, v] : r.max_sp_cc_by_f) {
    auto& s = agg.max_sp_cc_by_f[f];
    s = std::max(s, v);
  }
  for (auto& [f, v] : r.max_sp_dsm_by_f) {
    auto& s = agg.max_sp_dsm_by_f[f];
    s = std::max(s, v);
  }
  for (auto& [k, v] : r.max_passage_cc_by_k) {
    auto& s = agg.max_passage_cc_by_k[k];
    s = std::max(s, v);
  }
  agg.max_k = std::max(agg.max_k, r.max_k);
}

Report run_configured(const RunConfig& rc) {
  ExploreConfig ec = explore_config(rc);
  if (rc.scheduler == "explore") {
    Instance inst = build_instance(rc);
    auto drv = inst.make_driver();
    return explore(*drv, ec);
  }
  if (rc.scheduler == "fair") {
    Instance inst = build_instance(rc);
    auto drv = inst.make_driver();
    return fair_run(*drv, ec);
  }
  // Random: aggregate several independent schedules.
  Report agg;
  agg.exhaustive = false;
  for (int i = 0; i < rc.runs; ++i) {
    Instance inst = build_instance(rc);
    auto drv = inst.make_driver();
    ec.seed = rc.seed + static_cast<uint64_t>(i) * 0x9e3779b97f4a7c15ULL;
    absorb(agg, random_run(*drv, ec));
  }
  return agg;
}

}  // namespace

extern "C" {

int rme_check(const char* config_json, rme_report** out) {
  if (!config_json || !out) return usage("null argument", out);
  try {
    RunConfig rc = RunConfig::from_json(
        nlohmann::json::parse(std::string(config_json)));
    rc.validate();
    Report rep = run_configured(rc);
    nlohmann::json j = rep.to_json();
    j["config"] = rc.to_json();
    return deliver({j.dump(2), "", rep.ok}, out);
  } catch (const ConfigError& e) {
    return usage(e.what(), out);
  } catch (const nlohmann::json::exception& e) {
    return usage(std::string("bad config JSON: ") + e.what(), out);
  } catch (const HarnessFault& e) {
    return usage(std::string("harness fault: ") + e.what(), out);
  }
}

int rme_replay(const char* config_json, const char* actions_json,
               rme_report** out) {
  if (!config_json || !actions_json || !out)
    return usage("null argument", out);
  try {
    RunConfig rc = RunConfig::from_json(
        nlohmann::json::parse(std::string(config_json)));
    rc.validate();
    auto actions =
        actions_from_json(nlohmann::json::parse(std::string(actions_json)));
    Instance inst = build_instance(rc);
    auto drv = inst.make_driver();
    Report rep = replay(*drv, actions, explore_config(rc));
    nlohmann::json j = rep.to_json();
    j["config"] = rc.to_json();
    j["replayed_actions"] = static_cast<int64_t>(actions.size());
    return deliver({j.dump(2), "", rep.ok}, out);
  } catch (const ConfigError& e) {
    return usage(e.what(), out);
  } catch (const nlohmann::json::exception& e) {
    return usage(std::string("bad JSON: ") + e.what(), out);
  } catch (const HarnessFault& e) {
    return usage(std::string("harness fault: ") + e.what(), out);
  }
}

int rme_demo_starvation(int faulty, int rounds, rme_report** out) {
  if (!out) return usage("null argument", out);
  if (rounds < 1) return usage("rounds must be >= 1", out);
  try {
    StarvationResult r = starvation_scenario(faulty != 0, rounds);
    bool ok;
    if (faulty) {
      // The adversary must drive every round with the victim locked out.
      ok = !r.me_violation && !r.victim_entered_cs && !r.fell_back_to_fair &&
           r.rounds_completed == r.rounds_requested;
    } else {
      // The correct lock must defeat the script and admit the victim.
      ok = !r.me_violation && r.victim_entered_cs;
    }
    nlohmann::json j = r.to_json();
    j["ok"] = ok;
    return deliver({j.dump(2), "", ok}, out);
  } catch (const HarnessFault& e) {
    return usage(std::string("harness fault: ") + e.what(), out);
  }
}

int rme_bench(const char* which, uint64_t seed, int runs, rme_report** out) {
  if (!which || !out) return usage("null argument", out);
  if (runs < 1) return usage("runs must be >= 1", out);
  try {
    BenchOptions opt;
    opt.seed = seed;
    opt.runs = runs;
    std::string csv = run_bench(std::string(which), opt);
    nlohmann::json j = {{"ok", true}, {"sweep", which}};
    return deliver({j.dump(2), std::move(csv), true}, out);
  } catch (const ConfigError& e) {
    return usage(e.what(), out);
  } catch (const HarnessFault& e) {
    return usage(std::string("harness fault: ") + e.what(), out);
  }
}

const char* rme_report_json(const rme_report* r) {
  return r ? r->json.c_str() : "";
}

const char* rme_report_csv(const rme_report* r) {
  return r ? r->csv.c_str() : "";
}

int rme_report_ok(const rme_report* r) { return r && r->ok ? 1 : 0; }

void rme_report_free(rme_report* r) { delete r; }

const char* rme_last_error(void) { return g_last_error.c_str(); }

}  // extern "C"
