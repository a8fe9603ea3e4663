/*
 * Copyright 2026 The ploc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ploc/anchor.hpp"
#include "ploc/cfg.hpp"

namespace ploc::test {

inline std::filesystem::path fixture(const std::string &rel) {
  return std::filesystem::path(PLOC_FIXTURE_DIR) / rel;
}

inline std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct BlockSpec {
  BlockId id;
  std::vector<BlockId> succs;
  std::vector<std::string> code; ///< "mov eax, 1", or "12: mov eax, 1" with a line of t.c
};

inline std::vector<std::string> split_operands(const std::string &text) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : text) {
    if (ch == '[')
      ++depth;
    if (ch == ']')
      --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else if (!(cur.empty() && ch == ' ')) {
      cur += ch;
    }
  }
  while (!cur.empty() && cur.back() == ' ')
    cur.pop_back();
  if (!cur.empty())
    out.push_back(cur);
  return out;
}

inline Instruction assemble(std::string text, std::uint64_t address) {
  Instruction ins;
  ins.address = address;
  if (auto colon = text.find(": "); colon != std::string::npos &&
                                    std::isdigit(static_cast<unsigned char>(text[0]))) {
    ins.source_line = SourceLine{"t.c", std::stoi(text.substr(0, colon))};
    text = text.substr(colon + 2);
  }
  auto space = text.find(' ');
  ins.mnemonic = text.substr(0, space);
  if (space != std::string::npos)
    for (const auto &op : split_operands(text.substr(space + 1)))
      ins.operands.push_back(parse_operand(op));
  return ins;
}

/// Addresses advance by 4 per instruction from `base`, in block order. Calls
/// to symbols are recorded in the invoked list.
inline FunctionCFG make_function(const std::vector<BlockSpec> &spec,
                                 std::optional<std::string> name = "f",
                                 std::uint64_t base = 0x1000) {
  std::vector<BasicBlock> blocks;
  std::vector<Invocation> invoked;
  std::uint64_t addr = base;
  for (const auto &s : spec) {
    BasicBlock b;
    b.id = s.id;
    b.successors = s.succs;
    for (const auto &line : s.code) {
      b.instructions.push_back(assemble(line, addr));
      const auto &ins = b.instructions.back();
      if (ins.mnemonic == "call") {
        Invocation inv{addr, std::nullopt};
        if (!ins.operands.empty() && ins.operands[0].is_symbol())
          inv.callee = ins.operands[0].sym().name;
        invoked.push_back(inv);
      }
      addr += 4;
    }
    blocks.push_back(std::move(b));
  }
  return FunctionCFG(std::move(name), spec.front().id, std::move(blocks), std::move(invoked));
}

inline AuxConstant aux(std::int64_t c, AuxTag tag) { return AuxConstant{c, tag}; }

inline Anchor cmp_anchor(std::int64_t value, AuxList a = {}, std::uint64_t site = 0) {
  Anchor x;
  x.value = AnchorValue::integer(value);
  x.kind = AnchorKind::Cmp;
  x.aux = std::move(a);
  x.site = site;
  x.block_address = site;
  return x;
}

inline Anchor call_anchor(std::string callee, AuxList a = {}, std::uint64_t site = 0) {
  Anchor x;
  x.value = AnchorValue::symbol(std::move(callee));
  x.kind = AnchorKind::Call;
  x.aux = std::move(a);
  x.site = site;
  x.block_address = site;
  return x;
}

} // namespace ploc::test
