#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "alloc.hpp"
#include "checker.hpp"
#include "kernel.hpp"

namespace rme {

// Rejected run description (unknown lock kind, D > W, ...). Maps to the
// CLI's usage exit code, never to a verdict.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string lock = "wport";  // wport | faulty-wport | tree | adaptive
  int nprocs = 3;
  int ports = 0;      // D for wport, B for adaptive; 0 = nprocs
  int word_bits = 8;  // W
  int arity = 2;      // tree node fan-out
  bool reclaiming = false;  // bounded slot pools instead of fresh slots
  bool dsm_homes = true;    // home per-process words at their owner

  // Exploration budgets and scheduler.
  std::string scheduler = "explore";  // explore | random | fair
  int max_sps = 1;
  int max_crashes = 0;
  int max_aborts = 0;
  int64_t max_steps = 1000000;
  int64_t max_states = 50000000;
  uint64_t seed = 1;
  int runs = 1;  // random-scheduler repetitions

  Bounds bounds;  // caps to enforce; fields left at -1 are off

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;  // throws ConfigError
};

// A fully wired simulation: memory, slot allocators, the lock under test
// and the port each process uses. Drivers are created per run on top of
// this (the instance itself is mutable state and is not reusable across
// drivers).
struct Instance {
  std::unique_ptr<Memory> mem;
  std::vector<std::unique_ptr<SlotAllocator>> allocs;
  std::unique_ptr<Lock> lock;
  std::vector<int> port_of;

  std::unique_ptr<Driver> make_driver() {
    return std::make_unique<Driver>(*mem, lock.get(), port_of);
  }
};

Instance build_instance(const RunConfig& cfg);

// ExploreConfig prefilled from the run description (budgets, seed, bounds,
// well-formedness checking on).
ExploreConfig explore_config(const RunConfig& cfg);

}  // namespace rme
