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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include <json.hpp>

namespace ploc {

// ---------------------------------------------------------------------------
// Operands
//
// Operand strings follow a small fixed grammar:
//   register | immediate | [base + index*scale +/- disp] | symbol
// optionally preceded by a size prefix ("dword ptr") or a segment ("fs:").
// Anything else is kept as an opaque token that slicing ignores.
// ---------------------------------------------------------------------------

struct RegisterOperand {
  std::string name; ///< lower-case, as written (e.g. "al", "eax")
  bool operator==(const RegisterOperand &) const = default;
};

struct ImmediateOperand {
  std::int64_t value = 0;
  bool operator==(const ImmediateOperand &) const = default;
};

struct MemoryOperand {
  std::string segment; ///< empty when absent
  std::string base;    ///< empty when absent
  std::string index;   ///< empty when absent
  int scale = 1;
  std::int64_t disp = 0;
  bool operator==(const MemoryOperand &) const = default;

  /// Canonical text used as the identity of a memory slot during slicing.
  /// Registers are folded to their architectural family ("al" -> "rax").
  std::string slot_key() const;
};

struct SymbolOperand {
  std::string name;
  bool operator==(const SymbolOperand &) const = default;
};

struct OpaqueOperand {
  std::string text;
  bool operator==(const OpaqueOperand &) const = default;
};

using OperandValue = std::variant<RegisterOperand, ImmediateOperand,
                                  MemoryOperand, SymbolOperand, OpaqueOperand>;

struct Operand {
  std::string text; ///< original spelling, re-emitted verbatim
  OperandValue value;

  bool is_register() const { return std::holds_alternative<RegisterOperand>(value); }
  bool is_immediate() const { return std::holds_alternative<ImmediateOperand>(value); }
  bool is_memory() const { return std::holds_alternative<MemoryOperand>(value); }
  bool is_symbol() const { return std::holds_alternative<SymbolOperand>(value); }

  const RegisterOperand &reg() const { return std::get<RegisterOperand>(value); }
  std::int64_t imm() const { return std::get<ImmediateOperand>(value).value; }
  const MemoryOperand &mem() const { return std::get<MemoryOperand>(value); }
  const SymbolOperand &sym() const { return std::get<SymbolOperand>(value); }
};

/// Parses one operand string. Never throws; unrecognised text is opaque.
Operand parse_operand(std::string_view text);

/// Parses an integer literal: decimal, 0x-prefixed hex, or IDA-style
/// trailing-h hex ("0Eh", "0E0h"). An optional leading '-' is accepted.
std::optional<std::int64_t> parse_integer(std::string_view text);

/// True for x86/x86-64 general purpose register names (any width).
bool is_register_name(std::string_view name);

/// Architectural family of a register ("al", "ax", "eax" -> "rax").
/// Returns the input unchanged for registers without sub-registers.
std::string register_family(std::string_view name);

// ---------------------------------------------------------------------------
// Functions and pools
// ---------------------------------------------------------------------------

struct SourceLine {
  std::string file;
  int line = 0;
  bool operator==(const SourceLine &) const = default;
};

struct Instruction {
  std::uint64_t address = 0;
  std::string mnemonic; ///< lower-case
  std::vector<Operand> operands;
  std::optional<SourceLine> source_line;
};

using BlockId = std::string;

struct BasicBlock {
  BlockId id;
  std::vector<Instruction> instructions;
  std::vector<BlockId> successors;
  // Derived at load time.
  std::vector<BlockId> predecessors;
  bool reachable = true;

  std::uint64_t start_address() const { return instructions.front().address; }
};

struct Invocation {
  std::uint64_t site = 0;
  std::optional<std::string> callee; ///< nullopt: unresolved target
};

/// Names shaped like `sub_` + hex digits are auto-generated by disassemblers
/// and carry no symbol information.
bool is_stripped_name(std::string_view name);

class FunctionCFG {
public:
  FunctionCFG() = default;

  /// Builds and validates a function. Throws IntegrityError when a successor
  /// is dangling, addresses collide or are out of order, or an invocation
  /// site has no call-type instruction.
  FunctionCFG(std::optional<std::string> name, BlockId entry,
              std::vector<BasicBlock> blocks, std::vector<Invocation> invoked);

  const std::optional<std::string> &name() const { return name_; }
  /// Symbol name if present and not auto-generated.
  bool has_symbol() const { return name_ && !is_stripped_name(*name_); }
  /// Pool key: the name if present, else `sub_<ENTRY-ADDR>`.
  std::string id() const;

  const BlockId &entry() const { return entry_; }
  const std::vector<BasicBlock> &blocks() const { return blocks_; }
  const BasicBlock &block(const BlockId &id) const;
  const BasicBlock *find_block(const BlockId &id) const;
  std::size_t block_index(const BlockId &id) const;
  const std::vector<Invocation> &invoked() const { return invoked_; }
  const Invocation *invocation_at(std::uint64_t site) const;

  std::uint64_t entry_address() const { return block(entry_).start_address(); }
  std::size_t instruction_count() const;

private:
  std::optional<std::string> name_;
  BlockId entry_;
  std::vector<BasicBlock> blocks_;
  std::unordered_map<BlockId, std::size_t> block_index_;
  std::vector<Invocation> invoked_;
};

struct PoolMetadata {
  std::string compiler;
  std::string optimization;
  bool stripped = false;
};

class BinaryPool {
public:
  BinaryPool() = default;
  BinaryPool(PoolMetadata metadata, std::vector<FunctionCFG> functions);

  const PoolMetadata &metadata() const { return metadata_; }
  const std::vector<FunctionCFG> &functions() const { return functions_; }
  const FunctionCFG *find(std::string_view id) const;
  /// Looks a function up by id, then by entry address.
  const FunctionCFG *find_entry(std::uint64_t address) const;

private:
  PoolMetadata metadata_;
  std::vector<FunctionCFG> functions_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  std::map<std::uint64_t, std::size_t> by_entry_;
};

/// Reads a CFG-bundle document. Throws ParseError naming the offending field
/// (e.g. `functions[0].blocks[2].succs[1]`) or IntegrityError.
BinaryPool load_cfg_bundle(const std::filesystem::path &path);
BinaryPool parse_cfg_bundle(const nlohmann::json &doc);
BinaryPool parse_cfg_bundle_text(std::string_view text);

nlohmann::json emit_cfg_bundle(const BinaryPool &pool);

} // namespace ploc
