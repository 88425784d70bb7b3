#include "events.hpp"

namespace rme {

const char* event_kind_name(Event::Kind k) {
  switch (k) {
    case Event::MEMOP: return "MEMOP";
    case Event::CRASH: return "CRASH";
    case Event::ABORT_SIGNAL: return "ABORT_SIGNAL";
    case Event::SECTION_ENTER: return "SECTION_ENTER";
    case Event::SECTION_LEAVE: return "SECTION_LEAVE";
    case Event::SP_START: return "SP_START";
    case Event::SP_END: return "SP_END";
  }
  return "?";
}

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::Read: return "READ";
    case OpKind::Write: return "WRITE";
    case OpKind::Cas: return "CAS";
    case OpKind::Faa: return "FAA";
  }
  return "?";
}

const char* action_kind_name(Action::Kind k) {
  switch (k) {
    case Action::ARRIVE: return "arrive";
    case Action::STEP: return "step";
    case Action::CRASH: return "crash";
    case Action::ABORT: return "abort";
  }
  return "?";
}

static nlohmann::json value_to_json(const Value& v) {
  if (v.arity == 1) return v.f[0];
  return nlohmann::json{v.f[0], v.f[1], v.f[2]};
}

nlohmann::json event_to_json(const Event& e) {
  nlohmann::json j{{"kind", event_kind_name(e.kind)},
                   {"step", e.step_no},
                   {"pid", e.pid},
                   {"sp", e.sp_id},
                   {"passage", e.passage_id}};
  switch (e.kind) {
    case Event::MEMOP:
      j["op"] = op_kind_name(e.mem.op);
      j["addr"] = e.mem.addr;
      j["label"] = e.label;
      j["before"] = value_to_json(e.mem.before);
      j["after"] = value_to_json(e.mem.after);
      j["cc"] = e.mem.cost_cc;
      j["dsm"] = e.mem.cost_dsm;
      if (e.mem.op == OpKind::Cas) j["ok"] = e.mem.cas_ok;
      break;
    case Event::SECTION_ENTER:
      j["section"] = section_name(e.section);
      j["lock"] = e.lock;
      j["port"] = e.port;
      j["depth"] = e.depth;
      break;
    case Event::SECTION_LEAVE:
      j["section"] = section_name(e.section);
      j["lock"] = e.lock;
      j["port"] = e.port;
      j["depth"] = e.depth;
      j["ret"] = e.ret;
      break;
    case Event::SP_END:
      j["aborted"] = e.aborted;
      break;
    default:
      break;
  }
  return j;
}

nlohmann::json actions_to_json(const std::vector<Action>& as) {
  nlohmann::json arr = nlohmann::json::array();
  for (const Action& a : as)
    arr.push_back({{"do", action_kind_name(a.kind)}, {"pid", a.pid}});
  return arr;
}

std::vector<Action> actions_from_json(const nlohmann::json& j) {
  std::vector<Action> out;
  for (const auto& e : j) {
    std::string k = e.at("do").get<std::string>();
    Action a{Action::STEP, e.at("pid").get<int>()};
    if (k == "arrive") a.kind = Action::ARRIVE;
    else if (k == "step") a.kind = Action::STEP;
    else if (k == "crash") a.kind = Action::CRASH;
    else if (k == "abort") a.kind = Action::ABORT;
    else throw HarnessFault("unknown action kind: " + k);
    out.push_back(a);
  }
  return out;
}

}  // namespace rme
