#pragma once

// Hand-assembled bytecode with hand-enumerated block partitions and typed
// edges. Offsets are annotated next to each listing.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "multicfv/cfg.hpp"

namespace fixtures {

using multicfv::cfg::EdgeKind;

struct ExpectedEdge {
  std::size_t source;
  EdgeKind kind;
  std::size_t target;
};

struct CfgFixture {
  const char* name;
  const char* hex;
  std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [start, end)
  std::vector<ExpectedEdge> edges;                          // sorted by (source, kind, target)
  std::vector<std::string> diagnostics;
};

inline const std::vector<CfgFixture>& cfg_fixtures() {
  static const std::vector<CfgFixture> all = {
      // 0 PUSH1 01 | 2 PUSH1 02 | 4 ADD | 5 STOP
      {"straight_line", "600160020100", {{0, 6}}, {}, {}},

      // 0 PUSH1 04 | 2 JUMP | 3 STOP | 4 JUMPDEST | 5 STOP
      {"unconditional_jump", "600456005b00", {{0, 3}, {3, 4}, {4, 6}}, {{0, EdgeKind::Unconditional, 2}}, {}},

      // 0 PUSH1 01 | 2 PUSH1 0a | 4 JUMPI | 5 PUSH1 00 | 7 PUSH1 0d | 9 JUMP
      // 10 JUMPDEST | 11 PUSH1 02 | 13 JUMPDEST | 14 STOP
      {"diamond",
       "6001600a576000600d565b60025b00",
       {{0, 5}, {5, 10}, {10, 13}, {13, 15}},
       {{0, EdgeKind::ConditionalTrue, 2},
        {0, EdgeKind::ConditionalFalse, 1},
        {1, EdgeKind::Unconditional, 3},
        {2, EdgeKind::Unconditional, 3}},
       {}},

      // 0 PUSH1 00 | 2 JUMPDEST | 3 PUSH1 01 | 5 ADD | 6 DUP1 | 7 PUSH1 0a | 9 LT
      // 10 PUSH1 02 | 12 JUMPI | 13 STOP
      {"loop",
       "60005b60010180600a1060025700",
       {{0, 2}, {2, 13}, {13, 14}},
       {{0, EdgeKind::Unconditional, 1}, {1, EdgeKind::ConditionalTrue, 1}, {1, EdgeKind::ConditionalFalse, 2}},
       {}},

      // 0 PUSH1 01 | 2 PUSH1 06 | 4 JUMPI | 5 STOP | 6 JUMPDEST | 7 PUSH1 00 | 9 PUSH1 06 | 11 JUMPI <end>
      {"trailing_jumpi",
       "6001600657005b6000600657",
       {{0, 5}, {5, 6}, {6, 12}, {12, 12}},
       {{0, EdgeKind::ConditionalTrue, 2},
        {0, EdgeKind::ConditionalFalse, 1},
        {2, EdgeKind::ConditionalTrue, 2},
        {2, EdgeKind::ConditionalFalse, 3}},
       {}},

      // 0 PUSH1 00 | 2 CALLDATALOAD | 3 JUMP | 4 JUMPDEST | 5 STOP
      {"dynamic_jump", "600035565b00", {{0, 4}, {4, 6}}, {}, {"WARN unresolved-jump offset=3"}},

      // 0 PUSH1 01 | 2 PUSH1 06 | 4 JUMPI | 5 PUSH1 5b | 7 STOP
      // The 0x5b at offset 6 is push data, not a JUMPDEST.
      {"target_in_push_data",
       "600160065760" "5b00",
       {{0, 5}, {5, 8}},
       {{0, EdgeKind::ConditionalFalse, 1}},
       {"WARN target-not-jumpdest offset=4 target=6"}},

      // 0 GAS | 1 DELEGATECALL | 2 POP | 3 JUMPDEST | 4 GAS | 5 STATICCALL <end>
      {"calls",
       "5af4505b5afa",
       {{0, 3}, {3, 6}},
       {{0, EdgeKind::Unconditional, 1}, {0, EdgeKind::Call, 0}, {1, EdgeKind::Call, 1}},
       {}},

      // 0 PUSH1 01 | 2 0x0c (undefined) | 3 JUMPDEST | 4 PUSH2 ff <truncated>
      {"undefined_and_truncated", "6001" "0c" "5b61ff", {{0, 3}, {3, 7}}, {}, {}},

      // 0 PUSH1 00 | 2 CALLDATALOAD | 3 DUP1 | 4 PUSH1 01 | 6 EQ | 7 PUSH1 15 | 9 JUMPI
      // 10 DUP1 | 11 PUSH1 02 | 13 EQ | 14 PUSH1 17 | 16 JUMPI
      // 17 PUSH1 00 | 19 DUP1 | 20 REVERT | 21 JUMPDEST | 22 STOP | 23 JUMPDEST | 24 PUSH1 01 | 26 STOP
      {"dispatcher",
       "6000358060011460155780600214601757600080fd5b005b600100",
       {{0, 10}, {10, 17}, {17, 21}, {21, 23}, {23, 27}},
       {{0, EdgeKind::ConditionalTrue, 3},
        {0, EdgeKind::ConditionalFalse, 1},
        {1, EdgeKind::ConditionalTrue, 4},
        {1, EdgeKind::ConditionalFalse, 2}},
       {}},
  };
  return all;
}

}  // namespace fixtures
