// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "segsat/error.hpp"

namespace segsat {

const std::vector<std::string>& Vocabulary::special_names() {
  static const std::vector<std::string> names = {"<pad>", "<bos>", "<eos>", "<del>", "<unk>"};
  return names;
}

Vocabulary::Vocabulary() {
  for (const auto& name : special_names()) {
    index_.emplace(name, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(name);
  }
}

Vocabulary Vocabulary::from_tokens(std::span<const std::string> surface_tokens) {
  Vocabulary v;
  for (const auto& tok : surface_tokens) {
    if (tok.empty() || tok.find_first_of(" \t\r\n") != std::string::npos) {
      throw InputError("vocabulary token is empty or contains whitespace: '" + tok + "'");
    }
    if (!v.index_.emplace(tok, static_cast<TokenId>(v.tokens_.size())).second) {
      throw InputError("duplicate vocabulary token: '" + tok + "'");
    }
    v.tokens_.push_back(tok);
  }
  return v;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InputError("token id " + std::to_string(id) + " out of range for vocabulary of size " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end() || is_special(it->second)) return kUnk;
  return it->second;
}

bool Vocabulary::contains(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  return it != index_.end() && !is_special(it->second);
}

void Vocabulary::save(std::ostream& out) const {
  for (const auto& tok : tokens_) out << tok << '\n';
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open vocabulary file for writing: " + path);
  save(out);
  if (!out) throw LoadError("failed writing vocabulary file: " + path);
}

Vocabulary Vocabulary::load(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  const auto& specials = special_names();
  if (lines.size() < specials.size()) throw LoadError("vocabulary file has fewer than 5 lines");
  for (std::size_t i = 0; i < specials.size(); ++i) {
    if (lines[i] != specials[i]) {
      throw LoadError("vocabulary line " + std::to_string(i) + " must be '" + specials[i] +
                      "', found '" + lines[i] + "'");
    }
  }
  try {
    return from_tokens(std::span<const std::string>(lines).subspan(specials.size()));
  } catch (const InputError& e) {
    throw LoadError(e.what());
  }
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open vocabulary file: " + path);
  return load(in);
}

Vocabulary build_vocab(std::span<const std::string> corpus_lines, std::size_t min_freq,
                       std::size_t max_size) {
  if (min_freq < 1) throw InputError("min_freq must be >= 1");
  if (max_size < kNumSpecials + 1) throw InputError("max_size must be >= 6");

  struct Entry {
    std::string token;
    std::size_t count = 0;
    std::size_t first = 0;
  };
  std::vector<Entry> entries;
  std::unordered_map<std::string, std::size_t> where;
  const auto& specials = Vocabulary::special_names();
  bool any_token = false;
  for (const auto& line : corpus_lines) {
    for (auto& tok : split_tokens(line)) {
      any_token = true;
      if (std::find(specials.begin(), specials.end(), tok) != specials.end()) continue;
      auto [it, inserted] = where.emplace(tok, entries.size());
      if (inserted) entries.push_back({tok, 0, entries.size()});
      ++entries[it->second].count;
    }
  }
  if (!any_token) throw InputError("cannot build a vocabulary from an empty corpus");

  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    return a.count > b.count;
  });
  std::vector<std::string> kept;
  for (const auto& e : entries) {
    if (kept.size() + kNumSpecials >= max_size) break;
    if (e.count < min_freq) break;
    kept.push_back(e.token);
  }
  return Vocabulary::from_tokens(kept);
}

std::vector<std::string> split_tokens(std::string_view sentence) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (i < sentence.size()) {
    while (i < sentence.size() && is_space(sentence[i])) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !is_space(sentence[j])) ++j;
    if (j > i) out.emplace_back(sentence.substr(i, j - i));
    i = j;
  }
  return out;
}

TokenIds encode(const Vocabulary& vocab, std::string_view sentence) {
  TokenIds ids;
  for (const auto& tok : split_tokens(sentence)) ids.push_back(vocab.id(tok));
  return ids;
}

std::string decode_ids(const Vocabulary& vocab, std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(ids[i]);
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_lines(const std::string& path, std::span<const std::string> lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot open file for writing: " + path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw LoadError("failed writing file: " + path);
}

}  // namespace segsat
