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
#include "ploc/cfg.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include "ploc/error.hpp"

namespace ploc {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

struct RegisterInfo {
  std::string_view name;
  std::string_view family;
};

constexpr std::array kRegisters = {
    RegisterInfo{"al", "rax"},    RegisterInfo{"ah", "rax"},    RegisterInfo{"ax", "rax"},
    RegisterInfo{"eax", "rax"},   RegisterInfo{"rax", "rax"},   RegisterInfo{"bl", "rbx"},
    RegisterInfo{"bh", "rbx"},    RegisterInfo{"bx", "rbx"},    RegisterInfo{"ebx", "rbx"},
    RegisterInfo{"rbx", "rbx"},   RegisterInfo{"cl", "rcx"},    RegisterInfo{"ch", "rcx"},
    RegisterInfo{"cx", "rcx"},    RegisterInfo{"ecx", "rcx"},   RegisterInfo{"rcx", "rcx"},
    RegisterInfo{"dl", "rdx"},    RegisterInfo{"dh", "rdx"},    RegisterInfo{"dx", "rdx"},
    RegisterInfo{"edx", "rdx"},   RegisterInfo{"rdx", "rdx"},   RegisterInfo{"sil", "rsi"},
    RegisterInfo{"si", "rsi"},    RegisterInfo{"esi", "rsi"},   RegisterInfo{"rsi", "rsi"},
    RegisterInfo{"dil", "rdi"},   RegisterInfo{"di", "rdi"},    RegisterInfo{"edi", "rdi"},
    RegisterInfo{"rdi", "rdi"},   RegisterInfo{"bpl", "rbp"},   RegisterInfo{"bp", "rbp"},
    RegisterInfo{"ebp", "rbp"},   RegisterInfo{"rbp", "rbp"},   RegisterInfo{"spl", "rsp"},
    RegisterInfo{"sp", "rsp"},    RegisterInfo{"esp", "rsp"},   RegisterInfo{"rsp", "rsp"},
    RegisterInfo{"eip", "rip"},   RegisterInfo{"rip", "rip"},
};

const RegisterInfo *find_register(std::string_view name) {
  for (const auto &r : kRegisters)
    if (r.name == name)
      return &r;
  return nullptr;
}

// r8..r15 with optional b/l/w/d width suffix.
std::optional<std::string> extended_register_family(std::string_view name) {
  if (name.size() < 2 || name[0] != 'r' || !std::isdigit(static_cast<unsigned char>(name[1])))
    return std::nullopt;
  std::size_t i = 1;
  while (i < name.size() && std::isdigit(static_cast<unsigned char>(name[i])))
    ++i;
  int num = 0;
  std::from_chars(name.data() + 1, name.data() + i, num);
  if (num < 8 || num > 15)
    return std::nullopt;
  std::string_view suffix = name.substr(i);
  if (!(suffix.empty() || suffix == "b" || suffix == "l" || suffix == "w" || suffix == "d"))
    return std::nullopt;
  return "r" + std::to_string(num);
}

bool is_identifier(std::string_view s) {
  if (s.empty())
    return false;
  auto head = static_cast<unsigned char>(s.front());
  if (!(std::isalpha(head) || s.front() == '_' || s.front() == '.' || s.front() == '$' ||
        s.front() == '@' || s.front() == '?'))
    return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_' || c == '.' || c == '$' || c == '@' || c == '?' ||
           c == ':' || c == '<' || c == '>';
  });
}

std::optional<MemoryOperand> parse_memory_body(std::string_view body) {
  std::vector<std::pair<int, std::string>> terms;
  int sign = 1;
  std::string cur;
  bool dangling_operator = false;
  for (char c : body) {
    if (c == '+' || c == '-') {
      if (trim(cur).empty()) {
        if (c == '-')
          sign = -sign;
      } else {
        terms.emplace_back(sign, std::string(trim(cur)));
        cur.clear();
        sign = c == '-' ? -1 : 1;
      }
      dangling_operator = true;
      continue;
    }
    cur += c;
    if (!std::isspace(static_cast<unsigned char>(c)))
      dangling_operator = false;
  }
  if (dangling_operator || trim(cur).empty())
    return std::nullopt;
  terms.emplace_back(sign, std::string(trim(cur)));

  MemoryOperand mem;
  for (const auto &[term_sign, term] : terms) {
    std::string lt = lower(term);
    if (auto star = lt.find('*'); star != std::string::npos) {
      std::string lhs(trim(std::string_view(lt).substr(0, star)));
      std::string rhs(trim(std::string_view(lt).substr(star + 1)));
      if (is_register_name(rhs))
        std::swap(lhs, rhs);
      auto scale = parse_integer(rhs);
      if (!is_register_name(lhs) || !scale || !mem.index.empty() || term_sign < 0)
        return std::nullopt;
      mem.index = lhs;
      mem.scale = static_cast<int>(*scale);
    } else if (is_register_name(lt)) {
      if (term_sign < 0)
        return std::nullopt;
      if (mem.base.empty())
        mem.base = lt;
      else if (mem.index.empty())
        mem.index = lt;
      else
        return std::nullopt;
    } else if (auto v = parse_integer(lt)) {
      mem.disp += term_sign * *v;
    } else {
      return std::nullopt;
    }
  }
  return mem;
}

} // namespace

std::optional<std::int64_t> parse_integer(std::string_view text) {
  text = trim(text);
  bool negative = false;
  if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  if (text.empty())
    return std::nullopt;
  std::uint64_t value = 0;
  int base = 10;
  std::string_view digits = text;
  if (digits.size() > 2 && digits[0] == '0' && (digits[1] == 'x' || digits[1] == 'X')) {
    base = 16;
    digits.remove_prefix(2);
  } else if (digits.size() > 1 && (digits.back() == 'h' || digits.back() == 'H') &&
             std::isdigit(static_cast<unsigned char>(digits.front()))) {
    base = 16;
    digits.remove_suffix(1);
  }
  if (digits.empty())
    return std::nullopt;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value, base);
  if (ec != std::errc{} || ptr != digits.data() + digits.size())
    return std::nullopt;
  auto signed_value = static_cast<std::int64_t>(value);
  return negative ? -signed_value : signed_value;
}

bool is_register_name(std::string_view name) {
  return find_register(name) != nullptr || extended_register_family(name).has_value();
}

std::string register_family(std::string_view name) {
  if (const auto *r = find_register(name))
    return std::string(r->family);
  if (auto ext = extended_register_family(name))
    return *ext;
  return std::string(name);
}

std::string MemoryOperand::slot_key() const {
  std::ostringstream os;
  if (!segment.empty())
    os << segment << ':';
  os << '[';
  if (!base.empty())
    os << register_family(base);
  if (!index.empty())
    os << '+' << register_family(index) << '*' << scale;
  if (disp != 0 || (base.empty() && index.empty()))
    os << (disp < 0 ? "-" : "+") << "0x" << std::hex
       << (disp < 0 ? static_cast<std::uint64_t>(-disp) : static_cast<std::uint64_t>(disp));
  os << ']';
  return os.str();
}

Operand parse_operand(std::string_view raw) {
  Operand op{std::string(raw), OpaqueOperand{std::string(trim(raw))}};
  std::string_view text = trim(raw);
  if (text.empty())
    return op;
  if (auto v = parse_integer(text)) {
    op.value = ImmediateOperand{*v};
    return op;
  }

  std::string lt = lower(text);
  std::string_view rest = lt;
  static constexpr std::array kSizes = {"byte", "word", "dword", "qword", "tbyte",
                                        "fword", "oword", "xmmword", "ymmword"};
  for (std::string_view size : kSizes) {
    if (rest.starts_with(size) && rest.size() > size.size() &&
        std::isspace(static_cast<unsigned char>(rest[size.size()]))) {
      std::string_view after = trim(rest.substr(size.size()));
      if (after.starts_with("ptr")) {
        rest = trim(after.substr(3));
        break;
      }
    }
  }
  std::string segment;
  if (rest.size() > 3 && rest[2] == ':' &&
      (rest.starts_with("cs") || rest.starts_with("ds") || rest.starts_with("es") ||
       rest.starts_with("fs") || rest.starts_with("gs") || rest.starts_with("ss"))) {
    segment = std::string(rest.substr(0, 2));
    rest = trim(rest.substr(3));
  }
  if (rest.size() >= 2 && rest.front() == '[' && rest.back() == ']') {
    if (auto mem = parse_memory_body(rest.substr(1, rest.size() - 2))) {
      mem->segment = segment;
      op.value = *mem;
    }
    return op;
  }
  if (!segment.empty()) {
    if (auto v = parse_integer(rest)) {
      MemoryOperand mem;
      mem.segment = segment;
      mem.disp = *v;
      op.value = mem;
    }
    return op;
  }
  if (is_register_name(lt)) {
    op.value = RegisterOperand{lt};
    return op;
  }
  std::string_view symbol = text;
  if (lt.starts_with("offset "))
    symbol = trim(text.substr(7));
  if (is_identifier(symbol))
    op.value = SymbolOperand{std::string(symbol)};
  return op;
}

bool is_stripped_name(std::string_view name) {
  if (!name.starts_with("sub_") || name.size() == 4)
    return false;
  return std::all_of(name.begin() + 4, name.end(),
                     [](unsigned char c) { return std::isxdigit(c); });
}

// ---------------------------------------------------------------------------

FunctionCFG::FunctionCFG(std::optional<std::string> name, BlockId entry,
                         std::vector<BasicBlock> blocks, std::vector<Invocation> invoked)
    : name_(std::move(name)), entry_(std::move(entry)), blocks_(std::move(blocks)),
      invoked_(std::move(invoked)) {
  const std::string who = name_ ? *name_ : std::string("<anonymous>");
  if (blocks_.empty())
    throw IntegrityError("function " + who + ": no blocks");
  std::set<std::uint64_t> addresses;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    auto &b = blocks_[i];
    if (!block_index_.emplace(b.id, i).second)
      throw IntegrityError("function " + who + ": duplicate block id '" + b.id + "'");
    if (b.instructions.empty())
      throw IntegrityError("function " + who + ": block '" + b.id + "' has no instructions");
    for (std::size_t k = 0; k < b.instructions.size(); ++k) {
      const auto addr = b.instructions[k].address;
      if (k > 0 && addr <= b.instructions[k - 1].address)
        throw IntegrityError("function " + who + ": block '" + b.id +
                             "' instructions are not address-ordered");
      if (!addresses.insert(addr).second)
        throw IntegrityError("function " + who + ": duplicate instruction address " +
                             std::to_string(addr));
    }
    b.predecessors.clear();
  }
  if (!block_index_.contains(entry_))
    throw IntegrityError("function " + who + ": entry block '" + entry_ + "' does not exist");
  for (auto &b : blocks_) {
    for (const auto &s : b.successors) {
      auto it = block_index_.find(s);
      if (it == block_index_.end())
        throw IntegrityError("function " + who + ": block '" + b.id +
                             "' lists missing successor '" + s + "'");
      auto &preds = blocks_[it->second].predecessors;
      if (std::find(preds.begin(), preds.end(), b.id) == preds.end())
        preds.push_back(b.id);
    }
  }

  std::vector<bool> seen(blocks_.size(), false);
  std::deque<std::size_t> work{block_index_.at(entry_)};
  seen[work.front()] = true;
  while (!work.empty()) {
    auto cur = work.front();
    work.pop_front();
    for (const auto &s : blocks_[cur].successors) {
      auto idx = block_index_.at(s);
      if (!seen[idx]) {
        seen[idx] = true;
        work.push_back(idx);
      }
    }
  }
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].reachable = seen[i];

  for (const auto &inv : invoked_) {
    bool found = false;
    for (const auto &b : blocks_) {
      for (const auto &ins : b.instructions) {
        if (ins.address == inv.site) {
          if (ins.mnemonic != "call" && ins.mnemonic != "jmp")
            throw IntegrityError("function " + who + ": invoked site " +
                                 std::to_string(inv.site) + " is not a call instruction");
          found = true;
        }
      }
    }
    if (!found)
      throw IntegrityError("function " + who + ": invoked site " + std::to_string(inv.site) +
                           " has no instruction");
  }
}

std::string FunctionCFG::id() const {
  if (name_ && !name_->empty())
    return *name_;
  std::ostringstream os;
  os << "sub_" << std::uppercase << std::hex << entry_address();
  return os.str();
}

const BasicBlock &FunctionCFG::block(const BlockId &id) const {
  return blocks_[block_index(id)];
}

const BasicBlock *FunctionCFG::find_block(const BlockId &id) const {
  auto it = block_index_.find(id);
  return it == block_index_.end() ? nullptr : &blocks_[it->second];
}

std::size_t FunctionCFG::block_index(const BlockId &id) const {
  auto it = block_index_.find(id);
  if (it == block_index_.end())
    throw IntegrityError("unknown block '" + id + "'");
  return it->second;
}

const Invocation *FunctionCFG::invocation_at(std::uint64_t site) const {
  for (const auto &inv : invoked_)
    if (inv.site == site)
      return &inv;
  return nullptr;
}

std::size_t FunctionCFG::instruction_count() const {
  std::size_t n = 0;
  for (const auto &b : blocks_)
    n += b.instructions.size();
  return n;
}

BinaryPool::BinaryPool(PoolMetadata metadata, std::vector<FunctionCFG> functions)
    : metadata_(std::move(metadata)), functions_(std::move(functions)) {
  for (std::size_t i = 0; i < functions_.size(); ++i) {
    if (!by_id_.emplace(functions_[i].id(), i).second)
      throw IntegrityError("duplicate function id '" + functions_[i].id() + "'");
    by_entry_.emplace(functions_[i].entry_address(), i);
  }
}

const FunctionCFG *BinaryPool::find(std::string_view id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &functions_[it->second];
}

const FunctionCFG *BinaryPool::find_entry(std::uint64_t address) const {
  auto it = by_entry_.find(address);
  return it == by_entry_.end() ? nullptr : &functions_[it->second];
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

const json &require(const json &obj, const char *key, const std::string &where) {
  if (!obj.is_object())
    throw ParseError(where, "expected object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(where.empty() ? key : where + "." + key, "missing field");
  return *it;
}

std::string require_string(const json &obj, const char *key, const std::string &where) {
  const auto &v = require(obj, key, where);
  if (!v.is_string())
    throw ParseError(where.empty() ? key : where + "." + key, "expected string");
  return v.get<std::string>();
}

const json &require_array(const json &obj, const char *key, const std::string &where) {
  const auto &v = require(obj, key, where);
  if (!v.is_array())
    throw ParseError(where.empty() ? key : where + "." + key, "expected array");
  return v;
}

std::uint64_t require_address(const json &v, const std::string &where) {
  if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw ParseError(where, "expected non-negative integer");
  return v.get<std::uint64_t>();
}

Instruction parse_instruction(const json &j, const std::string &where) {
  Instruction ins;
  ins.address = require_address(require(j, "addr", where), where + ".addr");
  ins.mnemonic = lower(require_string(j, "mnemonic", where));
  const auto &ops = require_array(j, "operands", where);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (!ops[i].is_string())
      throw ParseError(where + ".operands[" + std::to_string(i) + "]", "expected string");
    ins.operands.push_back(parse_operand(ops[i].get<std::string>()));
  }
  if (auto it = j.find("line"); it != j.end() && !it->is_null()) {
    const std::string lw = where + ".line";
    if (!it->is_array() || it->size() != 2 || !(*it)[0].is_string() ||
        !(*it)[1].is_number_integer())
      throw ParseError(lw, "expected [file, line] or null");
    ins.source_line = SourceLine{(*it)[0].get<std::string>(), (*it)[1].get<int>()};
  }
  return ins;
}

FunctionCFG parse_function(const json &j, const std::string &where) {
  std::optional<std::string> name;
  const auto &jn = require(j, "name", where);
  if (jn.is_string())
    name = jn.get<std::string>();
  else if (!jn.is_null())
    throw ParseError(where + ".name", "expected string or null");
  std::string entry = require_string(j, "entry", where);

  std::vector<BasicBlock> blocks;
  const auto &jb = require_array(j, "blocks", where);
  for (std::size_t i = 0; i < jb.size(); ++i) {
    const std::string bw = where + ".blocks[" + std::to_string(i) + "]";
    BasicBlock b;
    b.id = require_string(jb[i], "id", bw);
    const auto &jins = require_array(jb[i], "instructions", bw);
    if (jins.empty())
      throw ParseError(bw + ".instructions", "block must contain at least one instruction");
    for (std::size_t k = 0; k < jins.size(); ++k)
      b.instructions.push_back(
          parse_instruction(jins[k], bw + ".instructions[" + std::to_string(k) + "]"));
    const auto &js = require_array(jb[i], "succs", bw);
    for (std::size_t k = 0; k < js.size(); ++k) {
      if (!js[k].is_string())
        throw ParseError(bw + ".succs[" + std::to_string(k) + "]", "expected string");
      b.successors.push_back(js[k].get<std::string>());
    }
    blocks.push_back(std::move(b));
  }

  std::vector<Invocation> invoked;
  const auto &ji = require_array(j, "invoked", where);
  for (std::size_t i = 0; i < ji.size(); ++i) {
    const std::string iw = where + ".invoked[" + std::to_string(i) + "]";
    Invocation inv;
    inv.site = require_address(require(ji[i], "site", iw), iw + ".site");
    const auto &jc = require(ji[i], "callee", iw);
    if (jc.is_string())
      inv.callee = jc.get<std::string>();
    else if (!jc.is_null())
      throw ParseError(iw + ".callee", "expected string or null");
    invoked.push_back(std::move(inv));
  }
  return FunctionCFG(std::move(name), std::move(entry), std::move(blocks), std::move(invoked));
}

} // namespace

BinaryPool parse_cfg_bundle(const json &doc) {
  if (!doc.is_object())
    throw ParseError("", "bundle must be a JSON object");
  const auto &jm = require(doc, "metadata", "");
  PoolMetadata meta;
  meta.compiler = require_string(jm, "compiler", "metadata");
  meta.optimization = require_string(jm, "optimization", "metadata");
  const auto &js = require(jm, "stripped", "metadata");
  if (!js.is_boolean())
    throw ParseError("metadata.stripped", "expected boolean");
  meta.stripped = js.get<bool>();

  std::vector<FunctionCFG> functions;
  const auto &jf = require_array(doc, "functions", "");
  for (std::size_t i = 0; i < jf.size(); ++i)
    functions.push_back(parse_function(jf[i], "functions[" + std::to_string(i) + "]"));
  return BinaryPool(std::move(meta), std::move(functions));
}

BinaryPool parse_cfg_bundle_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw ParseError("", std::string("invalid JSON: ") + e.what());
  }
  return parse_cfg_bundle(doc);
}

BinaryPool load_cfg_bundle(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open CFG bundle '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_cfg_bundle_text(ss.str());
  } catch (const ParseError &e) {
    throw ParseError(e.where().empty() ? path.string() : path.string() + ": " + e.where(), e.detail());
  }
}

json emit_cfg_bundle(const BinaryPool &pool) {
  json doc;
  doc["metadata"] = {{"compiler", pool.metadata().compiler},
                     {"optimization", pool.metadata().optimization},
                     {"stripped", pool.metadata().stripped}};
  json functions = json::array();
  for (const auto &f : pool.functions()) {
    json jf;
    jf["name"] = f.name() ? json(*f.name()) : json(nullptr);
    jf["entry"] = f.entry();
    json blocks = json::array();
    for (const auto &b : f.blocks()) {
      json jins = json::array();
      for (const auto &ins : b.instructions) {
        json ops = json::array();
        for (const auto &op : ins.operands)
          ops.push_back(op.text);
        json line = ins.source_line
                        ? json::array({ins.source_line->file, ins.source_line->line})
                        : json(nullptr);
        jins.push_back({{"addr", ins.address},
                        {"mnemonic", ins.mnemonic},
                        {"operands", ops},
                        {"line", line}});
      }
      blocks.push_back({{"id", b.id}, {"instructions", jins}, {"succs", b.successors}});
    }
    jf["blocks"] = blocks;
    json invoked = json::array();
    for (const auto &inv : f.invoked())
      invoked.push_back(
          {{"site", inv.site}, {"callee", inv.callee ? json(*inv.callee) : json(nullptr)}});
    jf["invoked"] = invoked;
    functions.push_back(jf);
  }
  doc["functions"] = functions;
  return doc;
}

} // namespace ploc
