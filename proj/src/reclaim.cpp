#include "reclaim.hpp"

namespace rme {

namespace {

// Retire / GetIndex stage labels, persisted in the (pc, a, b) word.
enum GetPc {
  G_READ_TAIL = 0,
  G_READ_HEAD,
  G_READ_CELL,
  G_ADV_HEAD,
  G_DONE,
};

enum RetPc {
  R_INIT_CNT = 0,
  R_READ_RTAIL,
  R_WRITE_RCELL,
  R_ADV_RTAIL,
  R_READ_SCAN,
  R_READ_ANN,
  R_ADV_SCAN,
  R_READ_ANN_CNT,
  R_INC_ANN_CNT,
  R_READ_OTAIL,
  R_WRITE_OCELL,
  R_ADV_OTAIL,
  R_READ_OHEAD,
  R_OSIZE,
  R_READ_OCELL,
  R_ADV_OHEAD,
  R_READ_OCNT,
  R_DEC_OCNT,
  R_OFREE_TAIL,
  R_OFREE_CELL,
  R_OFREE_ADV,
  R_READ_RHEAD,
  R_RSIZE,
  R_READ_RCELL2,
  R_ADV_RHEAD,
  R_READ_RCNT,
  R_DEC_RCNT,
  R_RFREE_TAIL,
  R_RFREE_CELL,
  R_RFREE_ADV,
  R_DONE,
};

// Volatile cache of the persisted (pc, a, b) word, packed into one
// caller-supplied register. Bit 62 marks "loaded".
constexpr int64_t kLoaded = int64_t{1} << 62;

int64_t pack(const Value& v) {
  int64_t pc = v.f[0], a = v.f[1], b = v.f[2];
  if (a >= (int64_t{1} << 26) || b >= (int64_t{1} << 26) || a < -1 || b < -1)
    throw HarnessFault("pool bookkeeping value out of packing range");
  return kLoaded | (pc << 54) | ((a + 1) << 27) | (b + 1);
}

void unpack(int64_t s, int64_t& pc, int64_t& a, int64_t& b) {
  pc = (s >> 54) & 0xff;
  a = ((s >> 27) & ((int64_t{1} << 27) - 1)) - 1;
  b = (s & ((int64_t{1} << 27) - 1)) - 1;
}

}  // namespace

PoolAllocator::PoolAllocator(Memory& mem, std::string label, int ports,
                             int width_bits, std::vector<int> port_home)
    : mem_(mem), label_(std::move(label)), D_(ports), cap_(2 * ports + 1) {
  auto home = [&](int k) {
    return port_home.empty() ? kGlobalHome : port_home[k];
  };
  auto word = [&](const std::string& n, Value init, int h) {
    return mem_.alloc({label_ + "." + n, width_bits}, init, h);
  };
  for (int k = 0; k < D_; ++k) {
    std::string K = "[" + std::to_string(k) + "]";
    Port p;
    p.pcg = word("PCG" + K, Value::tuple(G_READ_TAIL, kNil, kNil), kGlobalHome);
    p.pcr = word("PCR" + K, Value::tuple(R_DONE, kNil, kNil), kGlobalHome);
    for (int i = 0; i < cap_; ++i) {
      std::string nm = "spin" + K + "[" + std::to_string(i) + "]";
      int s = mem_.alloc({label_ + "." + nm, 1}, Value::scalar(0), home(k));
      int c = word("cnt" + K + "[" + std::to_string(i) + "]",
                   Value::scalar(0), kGlobalHome);
      p.slot.push_back(s);
      p.refcnt.push_back(c);
      slot_meta_[s] = SlotMeta{k, c};
    }
    for (int i = 0; i < cap_; ++i)
      p.f_buf.push_back(word("fq" + K + "[" + std::to_string(i) + "]",
                             Value::scalar(p.slot[i]), kGlobalHome));
    for (int i = 0; i < D_; ++i) {
      p.r_buf.push_back(word("rq" + K + "[" + std::to_string(i) + "]",
                             Value::scalar(kNil), kGlobalHome));
      p.o_buf.push_back(word("oq" + K + "[" + std::to_string(i) + "]",
                             Value::scalar(kNil), kGlobalHome));
    }
    p.f_head = word("fhead" + K, Value::scalar(0), kGlobalHome);
    p.f_tail = word("ftail" + K, Value::scalar(cap_), kGlobalHome);
    p.r_head = word("rhead" + K, Value::scalar(0), kGlobalHome);
    p.r_tail = word("rtail" + K, Value::scalar(0), kGlobalHome);
    p.o_head = word("ohead" + K, Value::scalar(0), kGlobalHome);
    p.o_tail = word("otail" + K, Value::scalar(0), kGlobalHome);
    p.scan = word("scan" + K, Value::scalar(0), kGlobalHome);
    pool_.push_back(std::move(p));
  }
  for (int k = 0; k < D_; ++k)
    referenced_.push_back(
        word("REFERENCED[" + std::to_string(k) + "]", Value::scalar(kNil),
             home(k)));
}

int64_t PoolAllocator::filter(int port, int64_t addr) const {
  auto it = slot_meta_.find(addr);
  return (it != slot_meta_.end() && it->second.port == port) ? addr : kNil;
}

int PoolAllocator::slot_port(int64_t addr) const {
  auto it = slot_meta_.find(addr);
  return it == slot_meta_.end() ? -1 : it->second.port;
}

int64_t PoolAllocator::get_done_slot(int port) const {
  Value v = mem_.peek(pool_[port].pcg);
  return v.f[0] == G_DONE ? v.f[1] : kNil;
}

int PoolAllocator::free_count(int port) const {
  const Port& p = pool_[port];
  int64_t h = mem_.peek(p.f_head).s(), t = mem_.peek(p.f_tail).s();
  return static_cast<int>((t - h + 2 * cap_) % (2 * cap_));
}

bool PoolAllocator::step_get(int port, Ctx& ctx, int64_t& s0, int64_t& s1,
                             int64_t* out_slot) {
  Port& p = pool_[port];
  if (!(s1 & kLoaded)) {
    s1 = pack(mem_.read(p.pcg, ctx.pid));
    return false;
  }
  int64_t pc, a, b;
  unpack(s1, pc, a, b);
  auto persist = [&](int64_t npc, int64_t na, int64_t nb) {
    Value v = Value::tuple(npc, na, nb);
    mem_.write(p.pcg, ctx.pid, v);
    s1 = pack(v);
    s0 = 0;
  };
  switch (pc) {
    case G_READ_TAIL:
      if (s0 == 0) { s0 = 2 + mem_.read(p.f_tail, ctx.pid).s(); return false; }
      persist(G_READ_HEAD, s0 - 2, kNil);
      return false;
    case G_READ_HEAD: {
      if (s0 == 0) { s0 = 2 + mem_.read(p.f_head, ctx.pid).s(); return false; }
      int64_t h = s0 - 2;
      if (h == a)  // a = tail
        throw HarnessFault(label_ + ": FREE empty at GetIndex (port " +
                           std::to_string(port) + ")");
      persist(G_READ_CELL, h, kNil);
      return false;
    }
    case G_READ_CELL:
      if (s0 == 0) {
        s0 = 2 + mem_.read(p.f_buf[a % cap_], ctx.pid).s();
        return false;
      }
      persist(G_ADV_HEAD, a, s0 - 2);
      return false;
    case G_ADV_HEAD:
      mem_.write(p.f_head, ctx.pid, Value::scalar((a + 1) % (2 * cap_)));
      persist(G_DONE, b, kNil);
      return false;
    case G_DONE:
      *out_slot = a;
      return true;
    default:
      throw HarnessFault(label_ + ": bad GetIndex pc");
  }
}

bool PoolAllocator::step_retire(int port, int64_t slot, Ctx& ctx, int64_t& s0,
                                int64_t& s1) {
  Port& p = pool_[port];
  const int mod2d = 2 * D_;
  if (!(s1 & kLoaded)) {
    s1 = pack(mem_.read(p.pcr, ctx.pid));
    return false;
  }
  int64_t pc, a, b;
  unpack(s1, pc, a, b);
  auto persist = [&](int64_t npc, int64_t na, int64_t nb) {
    Value v = Value::tuple(npc, na, nb);
    mem_.write(p.pcr, ctx.pid, v);
    s1 = pack(v);
    s0 = 0;
  };
  // One charged read, staged through s0 across two invocations.
  auto staged_read = [&](int addr) -> int64_t {
    if (s0 == 0) {
      s0 = 2 + mem_.read(addr, ctx.pid).s();
      return -2;  // not yet available
    }
    return s0 - 2;
  };
  switch (pc) {
    case R_INIT_CNT:
      mem_.write(refcnt_addr(slot), ctx.pid, Value::scalar(1));
      persist(R_READ_RTAIL, kNil, kNil);
      return false;
    case R_READ_RTAIL: {
      int64_t v = staged_read(p.r_tail);
      if (v != -2) persist(R_WRITE_RCELL, v, kNil);
      return false;
    }
    case R_WRITE_RCELL:
      mem_.write(p.r_buf[a % D_], ctx.pid, Value::scalar(slot));
      persist(R_ADV_RTAIL, a, kNil);
      return false;
    case R_ADV_RTAIL:
      mem_.write(p.r_tail, ctx.pid, Value::scalar((a + 1) % mod2d));
      persist(R_READ_SCAN, kNil, kNil);
      return false;
    case R_READ_SCAN: {
      int64_t v = staged_read(p.scan);
      if (v != -2) persist(R_READ_ANN, v, kNil);
      return false;
    }
    case R_READ_ANN: {
      int64_t v = staged_read(referenced_[a % D_]);
      if (v != -2) persist(R_ADV_SCAN, a, filter(port, v));
      return false;
    }
    case R_ADV_SCAN:
      mem_.write(p.scan, ctx.pid, Value::scalar((a + 1) % D_));
      persist(b == kNil ? R_READ_OTAIL : R_READ_ANN_CNT, b, kNil);
      return false;
    case R_READ_ANN_CNT: {
      int64_t c = staged_read(refcnt_addr(a));
      if (c == -2) return false;
      if (c == 0) {
        // The announced slot is not pending retirement; nothing to count.
        persist(R_READ_OTAIL, kNil, kNil);
      } else {
        persist(R_INC_ANN_CNT, a, c);
      }
      return false;
    }
    case R_INC_ANN_CNT:
      mem_.write(refcnt_addr(a), ctx.pid, Value::scalar(b + 1));
      persist(R_READ_OTAIL, a, kNil);
      return false;
    case R_READ_OTAIL: {
      int64_t v = staged_read(p.o_tail);
      if (v != -2) persist(R_WRITE_OCELL, a, v);
      return false;
    }
    case R_WRITE_OCELL:
      mem_.write(p.o_buf[b % D_], ctx.pid, Value::scalar(a));
      persist(R_ADV_OTAIL, b, kNil);
      return false;
    case R_ADV_OTAIL:
      mem_.write(p.o_tail, ctx.pid, Value::scalar((a + 1) % mod2d));
      persist(R_READ_OHEAD, kNil, kNil);
      return false;
    case R_READ_OHEAD: {
      int64_t v = staged_read(p.o_head);
      if (v != -2) persist(R_OSIZE, v, kNil);
      return false;
    }
    case R_OSIZE: {
      int64_t t = staged_read(p.o_tail);
      if (t == -2) return false;
      if ((t - a + mod2d) % mod2d < D_) {
        persist(R_READ_RHEAD, kNil, kNil);  // ring not full yet: no undo due
      } else {
        persist(R_READ_OCELL, a, kNil);
      }
      return false;
    }
    case R_READ_OCELL: {
      int64_t x = staged_read(p.o_buf[a % D_]);
      if (x != -2) persist(R_ADV_OHEAD, a, x);
      return false;
    }
    case R_ADV_OHEAD:
      mem_.write(p.o_head, ctx.pid, Value::scalar((a + 1) % mod2d));
      persist(b == kNil ? R_READ_RHEAD : R_READ_OCNT, b, kNil);
      return false;
    case R_READ_OCNT: {
      int64_t c = staged_read(refcnt_addr(a));
      if (c != -2) persist(R_DEC_OCNT, a, c);
      return false;
    }
    case R_DEC_OCNT:
      mem_.write(refcnt_addr(a), ctx.pid, Value::scalar(b - 1));
      persist(b - 1 == 0 ? R_OFREE_TAIL : R_READ_RHEAD, a, kNil);
      return false;
    case R_OFREE_TAIL: {
      int64_t t = staged_read(p.f_tail);
      if (t != -2) persist(R_OFREE_CELL, a, t);
      return false;
    }
    case R_OFREE_CELL:
      mem_.write(p.f_buf[b % cap_], ctx.pid, Value::scalar(a));
      persist(R_OFREE_ADV, b, kNil);
      return false;
    case R_OFREE_ADV:
      mem_.write(p.f_tail, ctx.pid, Value::scalar((a + 1) % (2 * cap_)));
      persist(R_READ_RHEAD, kNil, kNil);
      return false;
    case R_READ_RHEAD: {
      int64_t v = staged_read(p.r_head);
      if (v != -2) persist(R_RSIZE, v, kNil);
      return false;
    }
    case R_RSIZE: {
      int64_t t = staged_read(p.r_tail);
      if (t == -2) return false;
      if ((t - a + mod2d) % mod2d < D_) {
        persist(R_DONE, kNil, kNil);
      } else {
        persist(R_READ_RCELL2, a, kNil);
      }
      return false;
    }
    case R_READ_RCELL2: {
      int64_t u = staged_read(p.r_buf[a % D_]);
      if (u != -2) persist(R_ADV_RHEAD, a, u);
      return false;
    }
    case R_ADV_RHEAD:
      mem_.write(p.r_head, ctx.pid, Value::scalar((a + 1) % mod2d));
      persist(R_READ_RCNT, b, kNil);
      return false;
    case R_READ_RCNT: {
      int64_t c = staged_read(refcnt_addr(a));
      if (c != -2) persist(R_DEC_RCNT, a, c);
      return false;
    }
    case R_DEC_RCNT:
      mem_.write(refcnt_addr(a), ctx.pid, Value::scalar(b - 1));
      persist(b - 1 == 0 ? R_RFREE_TAIL : R_DONE, a, kNil);
      return false;
    case R_RFREE_TAIL: {
      int64_t t = staged_read(p.f_tail);
      if (t != -2) persist(R_RFREE_CELL, a, t);
      return false;
    }
    case R_RFREE_CELL:
      mem_.write(p.f_buf[b % cap_], ctx.pid, Value::scalar(a));
      persist(R_RFREE_ADV, b, kNil);
      return false;
    case R_RFREE_ADV:
      mem_.write(p.f_tail, ctx.pid, Value::scalar((a + 1) % (2 * cap_)));
      persist(R_DONE, kNil, kNil);
      return false;
    case R_DONE:
      return true;
    default:
      throw HarnessFault(label_ + ": bad Retire pc");
  }
}

bool PoolAllocator::step_reset_get(int port, Ctx& ctx) {
  mem_.write(pool_[port].pcg, ctx.pid, Value::tuple(G_READ_TAIL, kNil, kNil));
  return true;
}

bool PoolAllocator::step_reset_retire(int port, Ctx& ctx) {
  mem_.write(pool_[port].pcr, ctx.pid, Value::tuple(R_INIT_CNT, kNil, kNil));
  return true;
}

}  // namespace rme
