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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ploc {

/// One change group of a unified diff: the context lines leading up to a run
/// of deletions/additions, the run itself, and the context lines after it.
///
/// A `@@` hunk containing several separated runs is split into one Hunk per
/// run; context lines between two runs appear as the trailing context of the
/// first and the leading context of the second.
struct Hunk {
  std::string old_file;
  std::string new_file;
  int old_start = 0; ///< old-side line number of the first context_before line
  int new_start = 0; ///< new-side line number of the first context_before line
  std::vector<std::string> context_before;
  std::vector<std::string> deleted;
  std::vector<std::string> added;
  std::vector<std::string> context_after;

  /// Old-side line number of the first deleted line (or of the position where
  /// additions are inserted).
  int old_change_line() const { return old_start + static_cast<int>(context_before.size()); }
  int new_change_line() const { return new_start + static_cast<int>(context_before.size()); }
};

struct PatchFile {
  std::vector<Hunk> hunks;
};

/// Parses unified-diff text. Throws ParseError on a malformed `@@` header, a
/// truncated hunk, or a diff without any deleted or added line.
PatchFile parse_patch_text(std::string_view text);
PatchFile parse_patch(const std::filesystem::path &path);

} // namespace ploc
