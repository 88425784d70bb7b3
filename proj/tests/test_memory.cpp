#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "memory.hpp"

using namespace rme;

TEST_CASE("bits_for matches a bit-length oracle") {
  CHECK(bits_for(-1) == 1);  // nil sentinel costs one symbol
  for (int64_t v = 0; v < 5000; ++v) {
    int expect = 1;
    while ((int64_t{1} << expect) <= v) ++expect;
    CHECK(bits_for(v) == expect);
  }
  CHECK(bits_for((int64_t{1} << 40) - 1) == 40);
  CHECK(bits_for(int64_t{1} << 40) == 41);
}

TEST_CASE("encoded_bits sums tuple fields") {
  CHECK(encoded_bits(Value::scalar(0)) == 1);
  CHECK(encoded_bits(Value::scalar(255)) == 8);
  CHECK(encoded_bits(Value::tuple(1, 7, 0)) == 1 + 3 + 1);
  CHECK(encoded_bits(Value::tuple(kNil, kNil, kNil)) == 3);
}

TEST_CASE("width validation rejects overflowing values") {
  Memory mem(2);
  int a = mem.alloc({"w", 4}, Value::scalar(0));
  mem.write(a, 0, Value::scalar(15));  // 4 bits, fits
  CHECK_THROWS_AS(mem.write(a, 0, Value::scalar(16)), HarnessFault);
  CHECK_THROWS_AS(mem.alloc({"bad", 3}, Value::scalar(8)), HarnessFault);
  CHECK_THROWS_AS(mem.read(99, 0), HarnessFault);
  CHECK_THROWS_AS(mem.write(-1, 0, Value::scalar(0)), HarnessFault);
}

// Independent reference cost model built straight from the two definitions:
// CC charges every write/CAS/FAA and every read of a word the process has
// no valid cached copy of (a read then caches it; any write-type op by
// another process invalidates it); DSM charges any access to a word whose
// home is a different process.
struct RefCosts {
  int nprocs;
  std::vector<std::set<int>> valid;  // per pid: addresses validly cached
  std::vector<int> home;

  explicit RefCosts(int n) : nprocs(n), valid(n) {}

  std::pair<int, int> read(int addr, int pid) {
    int cc = valid[pid].count(addr) ? 0 : 1;
    valid[pid].insert(addr);
    return {cc, home[addr] == pid ? 0 : 1};
  }
  std::pair<int, int> write_like(int addr, int pid) {
    for (int p = 0; p < nprocs; ++p)
      if (p != pid) valid[p].erase(addr);
    valid[pid].insert(addr);
    return {1, home[addr] == pid ? 0 : 1};
  }
};

TEST_CASE("CC and DSM charges match the reference cost model on random ops") {
  const int nprocs = 3, nwords = 6;
  Memory mem(nprocs);
  RefCosts ref(nprocs);
  std::vector<int> addrs;
  for (int i = 0; i < nwords; ++i) {
    int home = (i % 3 == 0) ? kGlobalHome : i % nprocs;
    addrs.push_back(mem.alloc({"w" + std::to_string(i), 8}, Value::scalar(0), home));
    ref.home.push_back(home);
  }

  MemOpRecord last{};
  mem.set_sink([&](const MemOpRecord& r) { last = r; });

  std::mt19937_64 rng(7);
  for (int step = 0; step < 20000; ++step) {
    int pid = static_cast<int>(rng() % nprocs);
    int addr = addrs[rng() % nwords];
    int op = static_cast<int>(rng() % 4);
    std::pair<int, int> want;
    switch (op) {
      case 0:
        mem.read(addr, pid);
        want = ref.read(addr, pid);
        break;
      case 1:
        mem.write(addr, pid, Value::scalar(static_cast<int64_t>(rng() % 200)));
        want = ref.write_like(addr, pid);
        break;
      case 2: {
        // Failed CAS must cost the same as a successful one.
        Value expect = Value::scalar(static_cast<int64_t>(rng() % 4));
        mem.cas(addr, pid, expect, Value::scalar(static_cast<int64_t>(rng() % 200)));
        want = ref.write_like(addr, pid);
        break;
      }
      default:
        mem.faa(addr, pid, 1);
        want = ref.write_like(addr, pid);
        break;
    }
    REQUIRE(last.cost_cc == want.first);
    REQUIRE(last.cost_dsm == want.second);
  }
}

TEST_CASE("repeated local reads are free in CC until an invalidation") {
  Memory mem(2);
  int a = mem.alloc({"x", 8}, Value::scalar(1));
  int charged = 0;
  mem.set_sink([&](const MemOpRecord& r) { charged += r.cost_cc; });

  mem.read(a, 0);
  CHECK(charged == 1);
  for (int i = 0; i < 10; ++i) mem.read(a, 0);
  CHECK(charged == 1);  // cached copy stays valid

  mem.write(a, 1, Value::scalar(2));  // invalidates p0's copy
  CHECK(charged == 2);
  mem.read(a, 0);
  CHECK(charged == 3);
  // p1 wrote last, so p1's own copy is valid.
  mem.read(a, 1);
  CHECK(charged == 3);
}

TEST_CASE("a failed CAS still invalidates other caches") {
  Memory mem(2);
  int a = mem.alloc({"x", 8}, Value::scalar(5));
  mem.read(a, 0);
  bool ok = mem.cas(a, 1, Value::scalar(99), Value::scalar(7));
  CHECK_FALSE(ok);
  CHECK(mem.peek(a) == Value::scalar(5));

  int cc = -1;
  mem.set_sink([&](const MemOpRecord& r) { cc = r.cost_cc; });
  mem.read(a, 0);
  CHECK(cc == 1);  // copy was invalidated despite the CAS failing
}

TEST_CASE("faa returns the previous value and rejects tuples and underflow") {
  Memory mem(1);
  int a = mem.alloc({"ctr", 8}, Value::scalar(3));
  CHECK(mem.faa(a, 0, 4) == Value::scalar(3));
  CHECK(mem.peek(a) == Value::scalar(7));
  CHECK_THROWS_AS(mem.faa(a, 0, -8), HarnessFault);  // would go negative
  int t = mem.alloc({"tup", 8}, Value::tuple(0, 0, 0));
  CHECK_THROWS_AS(mem.faa(t, 0, 1), HarnessFault);
}

TEST_CASE("nv-private words reject shared access paths and vice versa") {
  Memory mem(2);
  int shared = mem.alloc({"s", 8}, Value::scalar(0));
  int priv = mem.alloc({"p", 8, -1, true}, Value::scalar(0));
  CHECK_THROWS_AS(mem.nv_read(shared), HarnessFault);
  CHECK_THROWS_AS(mem.nv_write(shared, Value::scalar(1)), HarnessFault);
  bool fired = false;
  mem.set_sink([&](const MemOpRecord&) { fired = true; });
  mem.nv_write(priv, Value::scalar(9));
  CHECK(mem.nv_read(priv) == Value::scalar(9));
  CHECK_FALSE(fired);  // nv ops are uncharged and emit no events
}

TEST_CASE("snapshot/restore reproduces values, homes and cache validity") {
  Memory mem(2);
  int a = mem.alloc({"a", 8}, Value::scalar(1));
  int b = mem.alloc({"b", 8}, Value::scalar(2), 1);
  mem.read(a, 0);  // p0 caches a
  auto snap = mem.snapshot();

  mem.write(a, 1, Value::scalar(5));
  mem.rehome(b, 0);
  int extra = mem.alloc({"late", 8}, Value::scalar(0));
  CHECK(extra == 2);

  mem.restore(snap);
  CHECK(mem.size() == 2);
  CHECK(mem.peek(a) == Value::scalar(1));
  CHECK(mem.home(b) == 1);
  int cc = -1;
  mem.set_sink([&](const MemOpRecord& r) { cc = r.cost_cc; });
  mem.read(a, 0);
  CHECK(cc == 0);  // the pre-snapshot cached copy is back
  mem.read(a, 1);
  CHECK(cc == 1);
}

TEST_CASE("digest ignores cache validity only when asked") {
  Memory m1(2), m2(2);
  for (Memory* m : {&m1, &m2}) {
    int a = m->alloc({"a", 8}, Value::scalar(1));
    (void)a;
  }
  m1.read(0, 0);  // differ only in p0's cache
  uint64_t h1 = 0, h2 = 0;
  m1.hash_into(h1, /*with_caches=*/false);
  m2.hash_into(h2, /*with_caches=*/false);
  CHECK(h1 == h2);
  h1 = h2 = 0;
  m1.hash_into(h1, /*with_caches=*/true);
  m2.hash_into(h2, /*with_caches=*/true);
  CHECK(h1 != h2);
  // Value differences always show.
  m2.write(0, 1, Value::scalar(2));
  h1 = h2 = 0;
  m1.hash_into(h1, false);
  m2.hash_into(h2, false);
  CHECK(h1 != h2);
}

TEST_CASE("externally_referenced sees stored values and the register probe") {
  Memory mem(2);
  mem.alloc({"pad", 8}, Value::scalar(3));  // keep interesting addrs nonzero
  int a = mem.alloc({"a", 8}, Value::scalar(0));
  int b = mem.alloc({"b", 8}, Value::tuple(0, static_cast<int64_t>(a), 0));
  CHECK(mem.externally_referenced(a));  // b's tuple holds a
  CHECK_FALSE(mem.externally_referenced(7));
  mem.set_ref_probe([&](int64_t addr) { return addr == 7; });
  CHECK(mem.externally_referenced(7));
  mem.write(b, 0, Value::tuple(0, 0, 0));
  CHECK_FALSE(mem.externally_referenced(a));
}

TEST_CASE("harness_recycle makes a word look freshly allocated") {
  Memory mem(2);
  int a = mem.alloc({"a", 8}, Value::scalar(42), 0);
  mem.read(a, 1);
  mem.harness_recycle(a, Value::scalar(0), 1);
  CHECK(mem.peek(a) == Value::scalar(0));
  CHECK(mem.home(a) == 1);
  int cc = -1;
  mem.set_sink([&](const MemOpRecord& r) { cc = r.cost_cc; });
  mem.read(a, 1);
  CHECK(cc == 1);  // stale cached copy was dropped
}
