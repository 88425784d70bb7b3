#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "memory.hpp"

namespace rme {

// Client-protocol sections, used in events and monitors.
enum class Section : uint8_t { Recover, Try, Cs, Exit };

inline const char* section_name(Section s) {
  switch (s) {
    case Section::Recover: return "RECOVER";
    case Section::Try: return "TRY";
    case Section::Cs: return "CS";
    case Section::Exit: return "EXIT";
  }
  return "?";
}

struct Event {
  enum Kind : uint8_t {
    MEMOP,
    CRASH,
    ABORT_SIGNAL,
    SECTION_ENTER,
    SECTION_LEAVE,
    SP_START,
    SP_END
  };
  Kind kind;
  int64_t step_no = 0;
  int pid = -1;
  int64_t sp_id = -1;
  int64_t passage_id = -1;
  // MEMOP payload
  MemOpRecord mem{};
  std::string label;  // word label
  // SECTION payload; `lock` and `port` identify the (sub-)lock instance,
  // with depth 0 for the outermost algorithm's own sections.
  Section section = Section::Recover;
  std::string lock;
  int port = -1;
  int depth = 0;
  int ret = 0;          // method result on SECTION_LEAVE
  bool aborted = false; // SP_END: ended by an honoured abort
};

using Trace = std::vector<Event>;

// One adversary decision; a replayable counterexample is a decision list.
struct Action {
  enum Kind : uint8_t { ARRIVE, STEP, CRASH, ABORT } kind;
  int pid;
  bool operator==(const Action&) const = default;
};

const char* event_kind_name(Event::Kind k);
const char* op_kind_name(OpKind k);
const char* action_kind_name(Action::Kind k);

nlohmann::json event_to_json(const Event& e);
nlohmann::json actions_to_json(const std::vector<Action>& as);
std::vector<Action> actions_from_json(const nlohmann::json& j);

}  // namespace rme
