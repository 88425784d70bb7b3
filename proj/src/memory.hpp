#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "value.hpp"

namespace rme {

inline constexpr int kGlobalHome = -1;

// A bug in the harness or an algorithm stepping outside the model
// (unallocated address, width overflow). Never an algorithm verdict.
struct HarnessFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class OpKind : uint8_t { Read, Write, Cas, Faa };

struct RmrCharge {
  OpKind op;
  int pid;
  int addr;
  int cost_cc;
  int cost_dsm;
};

// Static per-address metadata; fixed at allocation, not part of snapshots
// (except `home`, which reclamation re-homes and therefore lives in the
// mutable state).
struct WordMeta {
  std::string label;
  int width_bits = 0;
  int lock_id = -1;
  bool nv_private = false;  // process-private NVRAM: uncharged, uncached
};

struct MemOpRecord {
  OpKind op;
  int pid;
  int addr;
  Value before;
  Value after;
  int cost_cc;
  int cost_dsm;
  bool cas_ok = false;
};

// Simulated persistent shared memory with CC/DSM RMR accounting.
// All state that crash steps must preserve lives here; CacheState is the
// per-process set of addresses whose cached copy is still valid.
class Memory {
 public:
  explicit Memory(int nprocs) : caches_(nprocs) {}

  int alloc(WordMeta meta, Value init, int home = kGlobalHome);

  Value read(int addr, int pid);
  void write(int addr, int pid, Value v);
  bool cas(int addr, int pid, const Value& expect, const Value& neu);
  Value faa(int addr, int pid, int64_t delta);

  // Process-private NVRAM cells: free in both cost models, no events,
  // allowed alongside a charged op within one step.
  Value nv_read(int addr) const;
  void nv_write(int addr, Value v);

  Value peek(int addr) const;  // harness inspection, no charge
  void rehome(int addr, int pid) { home_.at(addr) = pid; }

  // Ground-truth reachability of an address: some stored value or some
  // volatile register (via the harness probe) still refers to it. Used by
  // the never-reuse-while-referenced slot backend; a numeric coincidence
  // only delays reuse, never permits it.
  bool externally_referenced(int64_t addr) const;
  void set_ref_probe(std::function<bool(int64_t)> p) { ref_probe_ = std::move(p); }
  // Re-initializes an existing word as if freshly allocated (new value,
  // new home, uncached everywhere). Harness-level; no charge, no event.
  void harness_recycle(int addr, Value init, int home);
  int home(int addr) const { return home_.at(addr); }
  const WordMeta& meta(int addr) const { return meta_.at(addr); }
  int size() const { return static_cast<int>(words_.size()); }
  int nprocs() const { return static_cast<int>(caches_.size()); }

  bool cached(int addr, int pid) const;

  using OpSink = std::function<void(const MemOpRecord&)>;
  void set_sink(OpSink s) { sink_ = std::move(s); }

  // Cache validity only influences RMR accounting, never reachability or
  // safety, so state-space digests may skip it.
  void hash_into(uint64_t& h, bool with_caches = true) const;
  // Snapshot keeps values, homes and caches; meta is immutable except that
  // restore truncates words allocated after the snapshot was taken.
  struct Snapshot {
    std::vector<Value> words;
    std::vector<int8_t> home;
    std::vector<std::vector<uint64_t>> caches;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  void validate(int addr, const Value& v) const;
  void charge_and_emit(OpKind op, int addr, int pid, const Value& before,
                       const Value& after, bool is_read, bool cas_ok);
  void invalidate_others(int addr, int pid);
  void cache_insert(int addr, int pid);

  std::vector<Value> words_;
  std::vector<int8_t> home_;
  std::vector<WordMeta> meta_;
  std::vector<std::vector<uint64_t>> caches_;  // bitset per pid
  OpSink sink_;
  std::function<bool(int64_t)> ref_probe_;
};

uint64_t mix64(uint64_t x);
void hash_combine(uint64_t& h, uint64_t v);

}  // namespace rme
