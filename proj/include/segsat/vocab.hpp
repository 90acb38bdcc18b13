// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace segsat {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;

/// Reserved control ids. They occupy the first five vocabulary entries in this order.
enum Special : TokenId {
  kPad = 0,
  kBos = 1,
  kEos = 2,
  kDel = 3,
  kUnk = 4,
};
inline constexpr std::size_t kNumSpecials = 5;

/// Token <-> id map. Immutable once built; safe to share across threads.
class Vocabulary {
 public:
  /// A vocabulary holding only the five specials.
  Vocabulary();

  /// Build from surface tokens, which must not repeat or collide with special names.
  static Vocabulary from_tokens(std::span<const std::string> surface_tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  /// kUnk for unknown surface strings, and for surface text spelling a control name.
  TokenId id(std::string_view surface) const;
  bool contains(std::string_view surface) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

  static const std::vector<std::string>& special_names();
  static bool is_special(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kNumSpecials); }

  /// One token per line; the line number is the id.
  void save(std::ostream& out) const;
  void save(const std::string& path) const;
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::string& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Collect the most frequent tokens of a line-tokenized corpus.
/// Frequency ties are broken by first occurrence. Throws InputError on an empty corpus.
Vocabulary build_vocab(std::span<const std::string> corpus_lines, std::size_t min_freq,
                       std::size_t max_size);

/// Split on runs of whitespace.
std::vector<std::string> split_tokens(std::string_view sentence);

TokenIds encode(const Vocabulary& vocab, std::string_view sentence);

/// Space-joined surface form. Control ids render as their canonical names.
/// Throws InputError for ids outside the vocabulary.
std::string decode_ids(const Vocabulary& vocab, std::span<const TokenId> ids);

/// Reads a UTF-8 text file, one sentence per line, stripping a trailing '\r'.
std::vector<std::string> read_lines(const std::string& path);
void write_lines(const std::string& path, std::span<const std::string> lines);

}  // namespace segsat
