#include "config.hpp"

#include "adaptive.hpp"
#include "reclaim.hpp"
#include "tree.hpp"
#include "wport.hpp"

namespace rme {

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  c.lock = j.value("lock", c.lock);
  c.nprocs = j.value("nprocs", c.nprocs);
  c.ports = j.value("ports", c.ports);
  c.word_bits = j.value("word_bits", c.word_bits);
  c.arity = j.value("arity", c.arity);
  c.reclaiming = j.value("reclaiming", c.reclaiming);
  c.dsm_homes = j.value("dsm_homes", c.dsm_homes);
  c.scheduler = j.value("scheduler", c.scheduler);
  c.max_sps = j.value("max_sps", c.max_sps);
  c.max_crashes = j.value("max_crashes", c.max_crashes);
  c.max_aborts = j.value("max_aborts", c.max_aborts);
  c.max_steps = j.value("max_steps", c.max_steps);
  c.max_states = j.value("max_states", c.max_states);
  c.seed = j.value("seed", c.seed);
  c.runs = j.value("runs", c.runs);
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    c.bounds.passage_cc = b.value("passage_cc", c.bounds.passage_cc);
    c.bounds.passage_dsm = b.value("passage_dsm", c.bounds.passage_dsm);
    c.bounds.sp_a = b.value("sp_a", c.bounds.sp_a);
    c.bounds.sp_b = b.value("sp_b", c.bounds.sp_b);
    c.bounds.abort_steps = b.value("abort_steps", c.bounds.abort_steps);
    c.bounds.sp_steps = b.value("sp_steps", c.bounds.sp_steps);
    c.bounds.adapt_c0 = b.value("adapt_c0", c.bounds.adapt_c0);
    c.bounds.adapt_c1 = b.value("adapt_c1", c.bounds.adapt_c1);
    c.bounds.adapt_ports = b.value("adapt_ports", c.bounds.adapt_ports);
    c.bounds.witness = b.value("witness", c.bounds.witness);
  }
  return c;
}

nlohmann::json RunConfig::to_json() const {
  return {{"lock", lock},
          {"nprocs", nprocs},
          {"ports", ports},
          {"word_bits", word_bits},
          {"arity", arity},
          {"reclaiming", reclaiming},
          {"dsm_homes", dsm_homes},
          {"scheduler", scheduler},
          {"max_sps", max_sps},
          {"max_crashes", max_crashes},
          {"max_aborts", max_aborts},
          {"max_steps", max_steps},
          {"max_states", max_states},
          {"seed", seed},
          {"runs", runs},
          {"bounds",
           {{"passage_cc", bounds.passage_cc},
            {"passage_dsm", bounds.passage_dsm},
            {"sp_a", bounds.sp_a},
            {"sp_b", bounds.sp_b},
            {"abort_steps", bounds.abort_steps},
            {"sp_steps", bounds.sp_steps},
            {"adapt_c0", bounds.adapt_c0},
            {"adapt_c1", bounds.adapt_c1},
            {"adapt_ports", bounds.adapt_ports},
            {"witness", bounds.witness}}}};
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (lock != "wport" && lock != "faulty-wport" && lock != "tree" &&
      lock != "adaptive") {
    fail("unknown lock kind: " + lock);
  }
  if (nprocs < 1) fail("nprocs must be >= 1");
  if (word_bits < 1 || word_bits > 62) fail("word_bits must be in [1, 62]");
  if (scheduler != "explore" && scheduler != "random" && scheduler != "fair") {
    fail("unknown scheduler: " + scheduler);
  }
  int d = ports > 0 ? ports : nprocs;
  if (lock == "wport" || lock == "faulty-wport") {
    if (d > word_bits) fail("ports must be <= word_bits");
    if (nprocs > d) fail("nprocs must be <= ports (one port per process)");
  } else if (lock == "adaptive") {
    if (d > word_bits) fail("ports (capture slots) must be <= word_bits");
    if (reclaiming) fail("reclaiming pools apply to the ported lock only");
  } else {  // tree
    if (arity < 2) fail("arity must be >= 2");
    if (arity > word_bits) fail("arity must be <= word_bits");
    if (reclaiming) fail("reclaiming pools apply to the ported lock only");
  }
  if (max_sps < 1) fail("max_sps must be >= 1");
  if (max_crashes < 0 || max_aborts < 0) fail("budgets must be >= 0");
  if (runs < 1) fail("runs must be >= 1");
}

Instance build_instance(const RunConfig& cfg) {
  cfg.validate();
  Instance inst;
  inst.mem = std::make_unique<Memory>(cfg.nprocs);
  Memory& mem = *inst.mem;
  int n = cfg.nprocs;
  int d = cfg.ports > 0 ? cfg.ports : n;

  std::vector<int> proc_home;
  if (cfg.dsm_homes) {
    proc_home.resize(n);
    for (int i = 0; i < n; ++i) proc_home[i] = i;
  }

  if (cfg.lock == "wport" || cfg.lock == "faulty-wport") {
    // Ports beyond the process count exist but stay unused; home each
    // used port's words at its process.
    std::vector<int> port_home;
    if (cfg.dsm_homes) {
      port_home.assign(d, kGlobalHome);
      for (int k = 0; k < n; ++k) port_home[k] = k;
    }
    std::unique_ptr<SlotAllocator> alloc;
    if (cfg.reclaiming) {
      alloc = std::make_unique<PoolAllocator>(mem, "L", d, 64, port_home);
    } else {
      alloc = std::make_unique<FreshAllocator>(mem, "L", d, 64);
    }
    WportConfig wc;
    wc.ports = d;
    wc.word_bits = cfg.word_bits;
    wc.faulty = cfg.lock == "faulty-wport";
    wc.port_home = port_home;
    inst.lock = std::make_unique<WportLock>(mem, "L", wc, alloc.get());
    inst.allocs.push_back(std::move(alloc));
  } else if (cfg.lock == "tree") {
    TreeConfig tc;
    tc.nprocs = n;
    tc.arity = cfg.arity;
    tc.word_bits = cfg.word_bits;
    tc.proc_home = proc_home;
    inst.lock = std::make_unique<TreeLock>(mem, "T", tc);
  } else {
    AdaptConfig ac;
    ac.nprocs = n;
    ac.ports = d;
    ac.word_bits = cfg.word_bits;
    ac.proc_home = proc_home;
    inst.lock = std::make_unique<AdaptLock>(mem, "A", ac);
  }

  inst.port_of.resize(n);
  for (int i = 0; i < n; ++i) inst.port_of[i] = i;
  return inst;
}

ExploreConfig explore_config(const RunConfig& cfg) {
  ExploreConfig ec;
  ec.max_sps_per_proc = cfg.max_sps;
  ec.max_crashes = cfg.max_crashes;
  ec.max_aborts = cfg.max_aborts;
  ec.max_steps = cfg.max_steps;
  ec.max_states = static_cast<uint64_t>(cfg.max_states);
  ec.seed = cfg.seed;
  ec.bounds = cfg.bounds;
  if ((ec.bounds.adapt_c0 >= 0 || ec.bounds.adapt_c1 >= 0) &&
      ec.bounds.adapt_ports == 0 && cfg.lock == "adaptive") {
    ec.bounds.adapt_ports = cfg.ports > 0 ? cfg.ports : cfg.nprocs;
  }
  return ec;
}

}  // namespace rme
