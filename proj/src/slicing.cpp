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
// Key-instruction identification, backward slicing and anchor graph
// construction.

#include <algorithm>
#include <deque>
#include <functional>
#include <regex>

#include "ploc/anchor.hpp"

namespace ploc {

namespace {

bool is_frame_register(std::string_view reg) {
  auto fam = register_family(reg);
  return fam == "rsp" || fam == "rbp";
}

bool is_frame_slot(const MemoryOperand &m) {
  return !m.base.empty() && m.index.empty() && is_frame_register(m.base);
}

bool is_conditional_jump(std::string_view mn) { return mn.size() > 1 && mn[0] == 'j' && mn != "jmp"; }

// Instructions that read their first operand without writing it.
bool is_non_writing(std::string_view mn) {
  return mn == "cmp" || mn == "test" || mn == "push" || mn == "nop" || mn == "ret" ||
         mn == "jmp" || is_conditional_jump(mn);
}

bool is_move(std::string_view mn) {
  return mn == "mov" || mn == "movzx" || mn == "movsx" || mn == "movsxd" || mn == "movabs";
}

std::optional<AuxTag> arithmetic_tag(std::string_view mn) {
  if (mn == "add" || mn == "adc" || mn == "inc")
    return AuxTag::Add;
  if (mn == "sub" || mn == "sbb" || mn == "dec")
    return AuxTag::Sub;
  if (mn == "imul" || mn == "mul")
    return AuxTag::Mul;
  if (mn == "div" || mn == "idiv")
    return AuxTag::Div;
  if (mn == "and")
    return AuxTag::And;
  return std::nullopt;
}

// Read-modify-write instructions whose constant operand is not collected.
bool is_passthrough(std::string_view mn) {
  return mn == "or" || mn == "xor" || mn == "not" || mn == "neg" || mn == "shl" || mn == "shr" ||
         mn == "sar" || mn == "sal" || mn == "rol" || mn == "ror" || mn == "bswap" ||
         mn.starts_with("cmov");
}

// Auto-generated data labels carry no stable information.
bool is_auto_label(const std::string &name) {
  static const std::regex kAuto("^(sub|loc|off|dword|word|byte|qword|unk|stru|asc|locret)_[0-9A-Fa-f]+$");
  return std::regex_match(name, kAuto);
}

/// Variables currently followed by the slice: register families and
/// frame-slot memory expressions.
class TrackedSet {
public:
  bool empty() const { return regs_.empty() && slots_.empty(); }

  bool holds(const Operand &op) const {
    if (op.is_register())
      return regs_.contains(register_family(op.reg().name));
    if (op.is_memory())
      return slots_.contains(op.mem().slot_key());
    return false;
  }
  bool holds_register(std::string_view reg) const { return regs_.contains(register_family(reg)); }

  void track_register(std::string_view reg) { regs_.insert(register_family(reg)); }
  void untrack_register(std::string_view reg) { regs_.erase(register_family(reg)); }
  void track_slot(const MemoryOperand &m) { slots_.insert(m.slot_key()); }

  void untrack(const Operand &op) {
    if (op.is_register())
      untrack_register(op.reg().name);
    else if (op.is_memory())
      slots_.erase(op.mem().slot_key());
  }

private:
  std::set<std::string> regs_;
  std::set<std::string> slots_;
};

class Slicer {
public:
  explicit Slicer(AuxList &aux) : aux_(aux) {}

  TrackedSet &tracked() { return tracked_; }

  void emit(std::int64_t c, AuxTag tag) { aux_.push_back(AuxConstant{c, tag}); }

  // A memory read: frame slots are followed syntactically; other addresses
  // contribute their displacement and the address registers.
  void read_memory(const MemoryOperand &m) {
    if (is_frame_slot(m)) {
      tracked_.track_slot(m);
      return;
    }
    if (m.disp != 0)
      emit(m.disp, AuxTag::Offset);
    if (!m.base.empty())
      tracked_.track_register(m.base);
    if (!m.index.empty())
      tracked_.track_register(m.index);
  }

  // Data flowing into a tracked location from `src`.
  void read_source(const Operand &src, AuxTag imm_tag) {
    if (src.is_immediate())
      emit(src.imm(), imm_tag);
    else if (src.is_register())
      tracked_.track_register(src.reg().name);
    else if (src.is_memory())
      read_memory(src.mem());
  }

  /// Processes one instruction walking backwards. Returns false to stop.
  bool step(const Instruction &ins) {
    if (tracked_.empty() || sliced_ >= kMaxSlicedInstructions)
      return false;
    const auto &mn = ins.mnemonic;
    const auto &ops = ins.operands;

    if (mn == "call") {
      // Caller-saved registers hold the callee's results afterwards.
      for (auto reg : {"rax", "rcx", "rdx"})
        tracked_.untrack_register(reg);
      return !tracked_.empty();
    }
    if ((mn == "div" || mn == "idiv" || mn == "mul" || (mn == "imul" && ops.size() == 1)) &&
        ops.size() == 1) {
      if (tracked_.holds_register("rax")) {
        ++sliced_;
        read_source(ops[0], *arithmetic_tag(mn));
      }
      return true;
    }
    if (ops.empty() || !tracked_.holds(ops[0]) || is_non_writing(mn))
      return true;

    ++sliced_;
    const Operand &dst = ops[0];
    if (is_move(mn) && ops.size() >= 2) {
      tracked_.untrack(dst);
      read_source(ops[1], AuxTag::Assign);
    } else if (mn == "lea" && ops.size() >= 2) {
      tracked_.untrack(dst);
      if (ops[1].is_memory()) {
        const auto &m = ops[1].mem();
        if (!is_frame_slot(m)) {
          if (m.disp != 0)
            emit(m.disp, AuxTag::Offset);
          if (!m.base.empty())
            tracked_.track_register(m.base);
          if (!m.index.empty())
            tracked_.track_register(m.index);
        }
      }
    } else if ((mn == "xor" || mn == "sub") && ops.size() >= 2 && dst.is_register() &&
               ops[1].is_register() &&
               register_family(dst.reg().name) == register_family(ops[1].reg().name)) {
      tracked_.untrack(dst);
      emit(0, AuxTag::Assign);
    } else if (mn == "imul" && ops.size() == 3) {
      tracked_.untrack(dst);
      read_source(ops[1], AuxTag::Mul);
      if (ops[2].is_immediate())
        emit(ops[2].imm(), AuxTag::Mul);
    } else if (mn == "inc" || mn == "dec") {
      emit(1, *arithmetic_tag(mn));
    } else if (auto tag = arithmetic_tag(mn); tag && ops.size() >= 2) {
      read_source(ops[1], *tag);
    } else if (is_passthrough(mn)) {
      if (ops.size() >= 2 && ops[1].is_register())
        tracked_.track_register(ops[1].reg().name);
    } else {
      // pop, setcc, and anything unknown: the value is redefined from
      // something the slice cannot follow.
      tracked_.untrack(dst);
    }
    return !tracked_.empty();
  }

private:
  AuxList &aux_;
  TrackedSet tracked_;
  std::size_t sliced_ = 0;
};

// Visits instructions backwards from (block, position), then continues into
// the unique predecessor while there is exactly one and it has not been
// visited yet.
void walk_backward(const FunctionCFG &f, const BlockId &start, std::size_t position,
                   const std::function<bool(const Instruction &)> &visit) {
  std::set<BlockId> visited{start};
  const BasicBlock *block = &f.block(start);
  std::size_t pos = position;
  while (true) {
    for (std::size_t i = pos; i-- > 0;)
      if (!visit(block->instructions[i]))
        return;
    if (block->predecessors.size() != 1)
      return;
    const auto &pred = block->predecessors.front();
    if (!visited.insert(pred).second)
      return;
    block = &f.block(pred);
    pos = block->instructions.size();
  }
}

AuxList slice_comparison(const FunctionCFG &f, const KeyInstruction &key) {
  AuxList aux;
  Slicer slicer(aux);
  const auto &ops = key.instruction->operands;
  auto seed = [&](const Operand &op) {
    if (op.is_register())
      slicer.tracked().track_register(op.reg().name);
    else if (op.is_memory())
      slicer.read_memory(op.mem());
  };
  if (key.instruction->mnemonic == "test" && ops.size() >= 2) {
    if (ops[1].is_immediate()) {
      slicer.emit(ops[1].imm(), AuxTag::And);
      seed(ops[0]);
    } else if (ops[0].is_immediate()) {
      slicer.emit(ops[0].imm(), AuxTag::And);
      seed(ops[1]);
    } else {
      seed(ops[0]);
      seed(ops[1]);
    }
  } else {
    for (const auto &op : ops)
      seed(op);
  }
  walk_backward(f, key.block, key.position,
                [&](const Instruction &ins) { return slicer.step(ins); });
  return aux;
}

// Constant most recently assigned to `reg` before `position` in the block,
// stopping at a call or any other redefinition.
std::optional<std::int64_t> register_constant(const BasicBlock &block, std::size_t position,
                                              const std::string &reg) {
  const auto family = register_family(reg);
  for (std::size_t i = position; i-- > 0;) {
    const auto &ins = block.instructions[i];
    if (ins.mnemonic == "call")
      return std::nullopt;
    if (ins.operands.empty() || !ins.operands[0].is_register() ||
        register_family(ins.operands[0].reg().name) != family || is_non_writing(ins.mnemonic))
      continue;
    if (is_move(ins.mnemonic) && ins.operands.size() >= 2 && ins.operands[1].is_immediate())
      return ins.operands[1].imm();
    return std::nullopt;
  }
  return std::nullopt;
}

// x86 stack arguments between the call and the previous call or block start,
// ordered by argument position (ties keep program order).
AuxList slice_call(const FunctionCFG &f, const KeyInstruction &key) {
  struct Param {
    std::size_t position;
    std::size_t order;
    std::optional<AuxConstant> constant;
  };
  std::vector<Param> params;
  const auto &block = f.block(key.block);
  std::size_t pushes = 0;

  auto constant_of = [&](const Operand &src, std::size_t at) -> std::optional<AuxConstant> {
    if (src.is_immediate())
      return AuxConstant{src.imm(), AuxTag::Param};
    if (src.is_register()) {
      if (auto c = register_constant(block, at, src.reg().name))
        return AuxConstant{*c, AuxTag::Param};
      return std::nullopt;
    }
    if (src.is_symbol() && !is_auto_label(src.sym().name))
      return AuxConstant{src.sym().name, AuxTag::Param};
    return std::nullopt;
  };

  for (std::size_t i = key.position; i-- > 0 && params.size() < kMaxCallParameters;) {
    const auto &ins = block.instructions[i];
    if (ins.mnemonic == "call")
      break;
    if (ins.mnemonic == "push" && ins.operands.size() == 1) {
      params.push_back(Param{pushes++, i, constant_of(ins.operands[0], i)});
    } else if (is_move(ins.mnemonic) && ins.operands.size() >= 2 && ins.operands[0].is_memory()) {
      const auto &m = ins.operands[0].mem();
      if (m.base.empty() || !m.index.empty() || register_family(m.base) != "rsp" || m.disp < 0)
        continue;
      const std::int64_t word = m.base == "rsp" ? 8 : 4;
      params.push_back(Param{static_cast<std::size_t>(m.disp / word), i,
                             constant_of(ins.operands[1], i)});
    }
  }
  std::stable_sort(params.begin(), params.end(), [](const Param &a, const Param &b) {
    return a.position != b.position ? a.position < b.position : a.order < b.order;
  });
  AuxList aux;
  for (const auto &p : params)
    if (p.constant)
      aux.push_back(*p.constant);
  return aux;
}

AnchorValue call_target(const FunctionCFG &f, const Instruction &ins) {
  if (const auto *inv = f.invocation_at(ins.address))
    return inv->callee ? AnchorValue::symbol(*inv->callee) : AnchorValue::unresolved();
  if (!ins.operands.empty() && ins.operands[0].is_symbol())
    return AnchorValue::symbol(ins.operands[0].sym().name);
  return AnchorValue::unresolved();
}

} // namespace

std::vector<KeyInstruction> identify_key_instructions(const FunctionCFG &f,
                                                      const AnchorOptions &opts) {
  std::vector<KeyInstruction> keys;
  for (const auto &block : f.blocks()) {
    for (std::size_t i = 0; i < block.instructions.size(); ++i) {
      const auto &ins = block.instructions[i];
      const auto &mn = ins.mnemonic;
      const auto &ops = ins.operands;
      KeyInstruction key{&ins, block.id, i, AnchorKind::Cmp, AnchorValue::integer(0)};
      if (mn == "cmp" && ops.size() >= 2) {
        if (ops[1].is_immediate())
          key.value = AnchorValue::integer(ops[1].imm());
        else if (ops[0].is_immediate())
          key.value = AnchorValue::integer(ops[0].imm());
        else
          key.value = AnchorValue::inf();
      } else if (mn == "test" && !ops.empty()) {
        key.value = AnchorValue::integer(0);
      } else if (mn == "call") {
        key.kind = AnchorKind::Call;
        key.value = call_target(f, ins);
      } else if (mn == "jmp") {
        const bool recorded = f.invocation_at(ins.address) != nullptr;
        const bool known_entry = opts.function_symbols && !ops.empty() && ops[0].is_symbol() &&
                                 opts.function_symbols->contains(ops[0].sym().name);
        if (!recorded && !known_entry)
          continue;
        key.kind = AnchorKind::Call;
        key.value = call_target(f, ins);
      } else {
        continue;
      }
      keys.push_back(std::move(key));
    }
  }
  return keys;
}

AuxList backward_slice(const FunctionCFG &f, const KeyInstruction &key) {
  return key.kind == AnchorKind::Call ? slice_call(f, key) : slice_comparison(f, key);
}

namespace {

// Marks DFS back edges (edges into a block on the current DFS stack),
// starting at the entry and then at any block not reached from it.
std::set<std::pair<std::size_t, std::size_t>> back_edges(const FunctionCFG &f) {
  const auto &blocks = f.blocks();
  enum class State { Unvisited, OnStack, Done };
  std::vector<State> state(blocks.size(), State::Unvisited);
  std::set<std::pair<std::size_t, std::size_t>> result;

  auto dfs = [&](std::size_t root) {
    struct Frame {
      std::size_t block;
      std::size_t next_succ;
    };
    std::vector<Frame> stack{{root, 0}};
    state[root] = State::OnStack;
    while (!stack.empty()) {
      auto &top = stack.back();
      const auto &succs = blocks[top.block].successors;
      if (top.next_succ == succs.size()) {
        state[top.block] = State::Done;
        stack.pop_back();
        continue;
      }
      auto next = f.block_index(succs[top.next_succ++]);
      if (state[next] == State::OnStack) {
        result.emplace(top.block, next);
      } else if (state[next] == State::Unvisited) {
        state[next] = State::OnStack;
        stack.push_back({next, 0});
      }
    }
  };

  dfs(f.block_index(f.entry()));
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (state[i] == State::Unvisited)
      dfs(i);
  return result;
}

} // namespace

AnchorGraph build_anchor_graph(const FunctionCFG &f, const AnchorOptions &opts) {
  AnchorGraph ag(f.id());
  const auto &blocks = f.blocks();
  std::vector<std::vector<std::size_t>> anchors_in_block(blocks.size());

  for (const auto &key : identify_key_instructions(f, opts)) {
    Anchor a;
    a.value = key.value;
    a.kind = key.kind;
    a.aux = backward_slice(f, key);
    a.site = key.instruction->address;
    a.block = key.block;
    a.block_address = f.block(key.block).start_address();
    anchors_in_block[f.block_index(key.block)].push_back(ag.add_anchor(std::move(a)));
  }

  const auto back = back_edges(f);
  auto forward_successors = [&](std::size_t b) {
    std::vector<std::size_t> out;
    for (const auto &s : blocks[b].successors) {
      auto idx = f.block_index(s);
      if (!back.contains({b, idx}))
        out.push_back(idx);
    }
    return out;
  };

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto &local = anchors_in_block[b];
    if (local.empty())
      continue;
    for (std::size_t k = 1; k < local.size(); ++k)
      ag.add_edge(local[k - 1], local[k]);

    // First anchor of every block reachable from b through anchor-free blocks.
    std::vector<bool> seen(blocks.size(), false);
    std::deque<std::size_t> queue;
    for (auto s : forward_successors(b)) {
      if (!seen[s]) {
        seen[s] = true;
        queue.push_back(s);
      }
    }
    while (!queue.empty()) {
      auto cur = queue.front();
      queue.pop_front();
      if (!anchors_in_block[cur].empty()) {
        ag.add_edge(local.back(), anchors_in_block[cur].front());
        continue;
      }
      for (auto s : forward_successors(cur)) {
        if (!seen[s]) {
          seen[s] = true;
          queue.push_back(s);
        }
      }
    }
  }
  return ag;
}

} // namespace ploc
