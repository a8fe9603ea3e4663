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
#include "ploc/patch.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "ploc/error.hpp"

namespace ploc {

namespace {

struct Range {
  int start = 0;
  int count = 1;
};

// Parses "12,7" or "12" (count defaults to 1).
bool parse_range(std::string_view s, Range &out) {
  auto comma = s.find(',');
  std::string_view first = s.substr(0, comma);
  auto [p, ec] = std::from_chars(first.data(), first.data() + first.size(), out.start);
  if (ec != std::errc{} || p != first.data() + first.size() || first.empty())
    return false;
  out.count = 1;
  if (comma != std::string_view::npos) {
    std::string_view second = s.substr(comma + 1);
    auto [q, ec2] = std::from_chars(second.data(), second.data() + second.size(), out.count);
    if (ec2 != std::errc{} || q != second.data() + second.size() || second.empty())
      return false;
  }
  return out.start >= 0 && out.count >= 0;
}

// "@@ -a,b +c,d @@ optional section heading"
bool parse_hunk_header(std::string_view line, Range &old_range, Range &new_range) {
  if (!line.starts_with("@@ -"))
    return false;
  line.remove_prefix(4);
  auto space = line.find(' ');
  if (space == std::string_view::npos || !parse_range(line.substr(0, space), old_range))
    return false;
  line.remove_prefix(space + 1);
  if (!line.starts_with("+"))
    return false;
  line.remove_prefix(1);
  space = line.find(' ');
  if (space == std::string_view::npos || !parse_range(line.substr(0, space), new_range))
    return false;
  line.remove_prefix(space + 1);
  return line.starts_with("@@");
}

std::string strip_path(std::string_view header) {
  // "--- a/foo.c\t2024-01-01 ..." -> "a/foo.c"
  header = header.substr(4);
  auto tab = header.find('\t');
  return std::string(header.substr(0, tab));
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    if (!line.empty() && line.back() == '\r')
      line.remove_suffix(1);
    lines.emplace_back(line);
    if (nl == std::string_view::npos)
      break;
    pos = nl + 1;
  }
  return lines;
}

// Splits the body of one @@ hunk into change groups.
void split_groups(const std::vector<std::pair<char, std::string>> &body, const Range &old_range,
                  const Range &new_range, const std::string &old_file,
                  const std::string &new_file, std::vector<Hunk> &out) {
  int old_line = old_range.start;
  int new_line = new_range.start;
  Hunk cur;
  std::vector<std::string> pending_context;
  int pending_old = old_line;
  int pending_new = new_line;
  bool in_change = false;
  bool have_group = false;

  auto flush = [&] {
    if (have_group) {
      cur.context_after = pending_context;
      out.push_back(std::move(cur));
      cur = Hunk{};
    }
  };

  for (const auto &[kind, text] : body) {
    if (kind == ' ') {
      if (in_change)
        in_change = false;
      if (pending_context.empty()) {
        pending_old = old_line;
        pending_new = new_line;
      }
      pending_context.push_back(text);
      ++old_line;
      ++new_line;
      continue;
    }
    if (!in_change) {
      // Start of a new change run: the pending context closes the previous
      // group and opens this one.
      flush();
      cur.old_file = old_file;
      cur.new_file = new_file;
      cur.context_before = pending_context;
      cur.old_start = pending_context.empty() ? old_line : pending_old;
      cur.new_start = pending_context.empty() ? new_line : pending_new;
      pending_context.clear();
      in_change = true;
      have_group = true;
    }
    if (kind == '-') {
      cur.deleted.push_back(text);
      ++old_line;
    } else {
      cur.added.push_back(text);
      ++new_line;
    }
  }
  flush();
}

} // namespace

PatchFile parse_patch_text(std::string_view text) {
  PatchFile patch;
  const auto lines = split_lines(text);
  std::string old_file;
  std::string new_file;
  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string &line = lines[i];
    if (line.starts_with("--- ")) {
      old_file = strip_path(line);
      ++i;
      continue;
    }
    if (line.starts_with("+++ ")) {
      new_file = strip_path(line);
      ++i;
      continue;
    }
    if (!line.starts_with("@@")) {
      ++i; // diff --git, index, commit message, ...
      continue;
    }

    Range old_range;
    Range new_range;
    if (!parse_hunk_header(line, old_range, new_range))
      throw ParseError("line " + std::to_string(i + 1), "malformed hunk header '" + line + "'");
    ++i;
    int old_left = old_range.count;
    int new_left = new_range.count;
    std::vector<std::pair<char, std::string>> body;
    while (old_left > 0 || new_left > 0) {
      if (i >= lines.size())
        throw ParseError("line " + std::to_string(i + 1), "truncated hunk");
      const std::string &l = lines[i];
      if (l.starts_with("\\")) { // "\ No newline at end of file"
        ++i;
        continue;
      }
      char kind = l.empty() ? ' ' : l.front();
      std::string content = l.empty() ? std::string() : l.substr(1);
      switch (kind) {
      case ' ':
        --old_left;
        --new_left;
        break;
      case '-':
        --old_left;
        break;
      case '+':
        --new_left;
        break;
      default:
        throw ParseError("line " + std::to_string(i + 1),
                         "unexpected line inside hunk '" + l + "'");
      }
      if (old_left < 0 || new_left < 0)
        throw ParseError("line " + std::to_string(i + 1), "hunk longer than its header");
      body.emplace_back(kind, std::move(content));
      ++i;
    }
    while (i < lines.size() && lines[i].starts_with("\\"))
      ++i;
    split_groups(body, old_range, new_range, old_file, new_file, patch.hunks);
  }

  bool any_change = false;
  for (const auto &h : patch.hunks)
    any_change = any_change || !h.deleted.empty() || !h.added.empty();
  if (!any_change)
    throw ParseError("", "patch contains no deleted or added lines");
  return patch;
}

PatchFile parse_patch(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open patch '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_patch_text(ss.str());
  } catch (const ParseError &e) {
    throw ParseError(e.where().empty() ? path.string() : path.string() + ": " + e.where(), e.detail());
  }
}

} // namespace ploc
