#include "memory.hpp"

#include <sstream>

namespace rme {

std::string Value::str() const {
  if (arity == 1) return std::to_string(f[0]);
  std::ostringstream os;
  os << "(" << f[0];
  for (int i = 1; i < arity; ++i) os << "," << f[i];
  os << ")";
  return os.str();
}

int bits_for(int64_t v) {
  if (v < 0) return 1;  // nil sentinel
  int b = 1;
  while (v >= (int64_t{1} << b)) ++b;
  return b;
}

int encoded_bits(const Value& v) {
  int total = 0;
  for (int i = 0; i < v.arity; ++i) total += bits_for(v.f[i]);
  return total;
}

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

void hash_combine(uint64_t& h, uint64_t v) { h = mix64(h ^ mix64(v)); }

int Memory::alloc(WordMeta meta, Value init, int home) {
  if (encoded_bits(init) > meta.width_bits)
    throw HarnessFault("initial value exceeds width of " + meta.label);
  int addr = static_cast<int>(words_.size());
  words_.push_back(init);
  home_.push_back(static_cast<int8_t>(home));
  meta_.push_back(std::move(meta));
  return addr;
}

void Memory::validate(int addr, const Value& v) const {
  if (addr < 0 || addr >= size()) throw HarnessFault("unallocated address " + std::to_string(addr));
  if (encoded_bits(v) > meta_[addr].width_bits)
    throw HarnessFault("width overflow on " + meta_[addr].label + " value " + v.str());
}

bool Memory::cached(int addr, int pid) const {
  const auto& c = caches_[pid];
  size_t w = static_cast<size_t>(addr) / 64;
  return w < c.size() && (c[w] >> (addr % 64)) & 1;
}

void Memory::cache_insert(int addr, int pid) {
  auto& c = caches_[pid];
  size_t w = static_cast<size_t>(addr) / 64;
  if (w >= c.size()) c.resize(w + 1, 0);
  c[w] |= uint64_t{1} << (addr % 64);
}

void Memory::invalidate_others(int addr, int pid) {
  size_t w = static_cast<size_t>(addr) / 64;
  for (int p = 0; p < nprocs(); ++p) {
    if (p == pid) continue;
    auto& c = caches_[p];
    if (w < c.size()) c[w] &= ~(uint64_t{1} << (addr % 64));
  }
}

void Memory::charge_and_emit(OpKind op, int addr, int pid, const Value& before,
                             const Value& after, bool is_read, bool cas_ok) {
  int cc, dsm;
  if (is_read) {
    cc = cached(addr, pid) ? 0 : 1;
  } else {
    cc = 1;  // every write, CAS, or FAA is an RMR
  }
  dsm = (home_[addr] == pid) ? 0 : 1;
  if (!is_read) invalidate_others(addr, pid);
  cache_insert(addr, pid);
  if (sink_) sink_(MemOpRecord{op, pid, addr, before, after, cc, dsm, cas_ok});
}

Value Memory::read(int addr, int pid) {
  if (addr < 0 || addr >= size()) throw HarnessFault("read of unallocated address");
  Value v = words_[addr];
  charge_and_emit(OpKind::Read, addr, pid, v, v, /*is_read=*/true, false);
  return v;
}

void Memory::write(int addr, int pid, Value v) {
  validate(addr, v);
  Value before = words_[addr];
  words_[addr] = v;
  charge_and_emit(OpKind::Write, addr, pid, before, v, false, false);
}

bool Memory::cas(int addr, int pid, const Value& expect, const Value& neu) {
  validate(addr, neu);
  Value before = words_[addr];
  bool ok = (before == expect);
  if (ok) words_[addr] = neu;
  // Standard CC model: a failed CAS still invalidates cached copies.
  charge_and_emit(OpKind::Cas, addr, pid, before, words_[addr], false, ok);
  return ok;
}

Value Memory::faa(int addr, int pid, int64_t delta) {
  if (addr < 0 || addr >= size()) throw HarnessFault("faa on unallocated address");
  Value before = words_[addr];
  if (before.arity != 1) throw HarnessFault("faa on tuple word " + meta_[addr].label);
  Value after = Value::scalar(before.f[0] + delta);
  if (after.f[0] < 0) throw HarnessFault("faa underflow on " + meta_[addr].label);
  validate(addr, after);
  words_[addr] = after;
  charge_and_emit(OpKind::Faa, addr, pid, before, after, false, false);
  return before;
}

Value Memory::nv_read(int addr) const {
  if (!meta_.at(addr).nv_private) throw HarnessFault("nv_read on shared word");
  return words_[addr];
}

void Memory::nv_write(int addr, Value v) {
  if (!meta_.at(addr).nv_private) throw HarnessFault("nv_write on shared word");
  validate(addr, v);
  words_[addr] = v;
}

Value Memory::peek(int addr) const { return words_.at(addr); }

bool Memory::externally_referenced(int64_t addr) const {
  for (const Value& v : words_)
    for (int k = 0; k < v.arity; ++k)
      if (v.f[k] == addr) return true;
  return ref_probe_ && ref_probe_(addr);
}

void Memory::harness_recycle(int addr, Value init, int home) {
  validate(addr, init);
  words_[addr] = init;
  home_[addr] = static_cast<int8_t>(home);
  // A recycled word must look newly created: no process holds a valid
  // cached copy.
  size_t w = static_cast<size_t>(addr) / 64;
  for (auto& c : caches_)
    if (w < c.size()) c[w] &= ~(uint64_t{1} << (addr % 64));
}

void Memory::hash_into(uint64_t& h, bool with_caches) const {
  hash_combine(h, words_.size());
  for (size_t i = 0; i < words_.size(); ++i) {
    const Value& v = words_[i];
    hash_combine(h, v.arity);
    for (int k = 0; k < v.arity; ++k) hash_combine(h, static_cast<uint64_t>(v.f[k]));
  }
  if (!with_caches) return;
  // Homes, like caches, only steer RMR accounting: no instruction can
  // observe a word's home, so they stay out of the dedup digest and are
  // hashed only alongside the caches.
  for (size_t i = 0; i < words_.size(); ++i)
    hash_combine(h, static_cast<uint64_t>(home_[i]));
  for (const auto& c : caches_) {
    uint64_t acc = 0;
    for (size_t w = 0; w < c.size(); ++w) hash_combine(acc, c[w] ? mix64(c[w] + w) : 0);
    hash_combine(h, acc);
  }
}

Memory::Snapshot Memory::snapshot() const { return Snapshot{words_, home_, caches_}; }

void Memory::restore(const Snapshot& s) {
  words_ = s.words;
  home_ = s.home;
  caches_ = s.caches;
  // meta_ may be longer than words_ after a restore that truncates
  // dynamically allocated spin slots; re-allocation overwrites it.
  if (meta_.size() > words_.size()) meta_.resize(words_.size());
}

}  // namespace rme
