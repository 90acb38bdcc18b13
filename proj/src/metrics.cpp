// Copyright 2026 The SegSAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "segsat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <map>
#include <sstream>
#include <unordered_map>

#include "segsat/engine.hpp"
#include "segsat/error.hpp"

namespace segsat {

namespace {

constexpr std::size_t kRepWindow = 9;

void check_aligned(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InputError(std::string(what) + ": corpora have " + std::to_string(a) + " and " +
                     std::to_string(b) + " sentences");
  }
}

// Type-level reading of the deficit sum: each distinct reference token counted once.
std::size_t missing_count(const Sentence& hyp, const Sentence& ref) {
  std::unordered_map<std::string, std::ptrdiff_t> deficit;
  for (const auto& w : ref) ++deficit[w];
  for (const auto& w : hyp) {
    auto it = deficit.find(w);
    if (it != deficit.end()) --it->second;
  }
  std::size_t missing = 0;
  for (const auto& [w, c] : deficit)
    if (c > 0) missing += static_cast<std::size_t>(c);
  return missing;
}

}  // namespace

Corpus tokenize_corpus(std::span<const std::string> lines) {
  Corpus c;
  c.reserve(lines.size());
  for (const auto& l : lines) c.push_back(split_tokens(l));
  return c;
}

double rep_ratio(std::span<const Sentence> hyps) {
  std::size_t repeated = 0, total = 0;
  for (const auto& s : hyps) {
    total += s.size();
    for (std::size_t j = 1; j < s.size(); ++j) {
      const std::size_t lo = j >= kRepWindow ? j - kRepWindow : 0;
      for (std::size_t i = lo; i < j; ++i) {
        if (s[i] == s[j]) {
          ++repeated;
          break;
        }
      }
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(repeated) / static_cast<double>(total);
}

double rep_increment(std::span<const Sentence> hyps, std::span<const Sentence> at_hyps) {
  const double base = rep_ratio(at_hyps);
  if (base == 0.0) throw UndefinedMetricError("Rep is undefined: the reference system has no repeated tokens");
  return (rep_ratio(hyps) - base) / base;
}

double mis_ratio(std::span<const Sentence> hyps, std::span<const Sentence> refs) {
  check_aligned(hyps.size(), refs.size(), "mis_ratio");
  std::size_t missing = 0, total = 0;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    missing += missing_count(hyps[k], refs[k]);
    total += refs[k].size();
  }
  return total == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(total);
}

double mis_increment(std::span<const Sentence> hyps, std::span<const Sentence> at_hyps,
                     std::span<const Sentence> refs) {
  const double base = mis_ratio(at_hyps, refs);
  if (base == 0.0) throw UndefinedMetricError("Mis is undefined: the reference system misses no tokens");
  return (mis_ratio(hyps, refs) - base) / base;
}

double bleu(std::span<const Sentence> hyps, std::span<const Sentence> refs, std::size_t max_n) {
  check_aligned(hyps.size(), refs.size(), "bleu");
  if (max_n == 0) throw InputError("bleu needs max_n >= 1");
  std::vector<std::size_t> matched(max_n, 0), possible(max_n, 0);
  std::size_t hyp_len = 0, ref_len = 0;
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto& h = hyps[s];
    const auto& r = refs[s];
    hyp_len += h.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      if (h.size() < n) continue;
      std::map<std::vector<std::string>, std::size_t> ref_counts, hyp_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[{r.begin() + i, r.begin() + i + n}];
      for (std::size_t i = 0; i + n <= h.size(); ++i) ++hyp_counts[{h.begin() + i, h.begin() + i + n}];
      for (const auto& [gram, c] : hyp_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched[n - 1] += std::min(c, it->second);
      }
      possible[n - 1] += h.size() - n + 1;
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (matched[n] == 0 || possible[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(possible[n]));
  }
  const double bp = hyp_len < ref_len
                        ? std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len))
                        : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(max_n));
}

double avg_steps(std::span<const Translation> translations) {
  if (translations.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : translations) total += static_cast<double>(t.steps_used);
  return total / static_cast<double>(translations.size());
}

std::string MetricReport::to_json() const {
  nlohmann::ordered_json j;
  j["bleu"] = bleu;
  j["rep_ratio"] = rep_ratio;
  j["mis_ratio"] = mis_ratio;
  if (rep_increment) j["rep_increment"] = *rep_increment;
  if (mis_increment) j["mis_increment"] = *mis_increment;
  if (avg_steps) j["avg_steps"] = *avg_steps;
  if (sentences_per_second) j["sentences_per_second"] = *sentences_per_second;
  if (!notes.empty()) j["notes"] = notes;
  return j.dump();
}

std::string MetricReport::to_table() const {
  std::ostringstream os;
  char buf[128];
  auto row = [&](const char* name, const std::string& value) {
    std::snprintf(buf, sizeof buf, "%-22s %s\n", name, value.c_str());
    os << buf;
  };
  auto pct = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f%%", 100.0 * v);
    return std::string(b);
  };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.2f", v);
    return std::string(b);
  };
  row("BLEU", num(bleu));
  row("repetitive ratio", pct(rep_ratio));
  row("missing ratio", pct(mis_ratio));
  if (rep_increment) row("Rep", pct(*rep_increment));
  if (mis_increment) row("Mis", pct(*mis_increment));
  if (avg_steps) row("avg steps", num(*avg_steps));
  if (sentences_per_second) row("sentences/second", num(*sentences_per_second));
  for (const auto& n : notes) os << "note: " << n << '\n';
  return os.str();
}

MetricReport evaluate_corpus(std::span<const Sentence> hyps, std::span<const Sentence> refs,
                             const Corpus* at_hyps) {
  check_aligned(hyps.size(), refs.size(), "evaluate");
  MetricReport report;
  report.rep_ratio = rep_ratio(hyps);
  report.mis_ratio = mis_ratio(hyps, refs);
  report.bleu = bleu(hyps, refs);
  if (at_hyps) {
    check_aligned(at_hyps->size(), refs.size(), "evaluate");
    // 0/0 (both systems at zero) is reported as no change; x/0 with x > 0 stays undefined.
    const double rep_base = rep_ratio(*at_hyps);
    if (rep_base == 0.0 && report.rep_ratio == 0.0) {
      report.rep_increment = 0.0;
    } else {
      try {
        report.rep_increment = rep_increment(hyps, *at_hyps);
      } catch (const UndefinedMetricError& e) {
        report.notes.emplace_back(e.what());
      }
    }
    const double mis_base = mis_ratio(*at_hyps, refs);
    if (mis_base == 0.0 && report.mis_ratio == 0.0) {
      report.mis_increment = 0.0;
    } else {
      try {
        report.mis_increment = mis_increment(hyps, *at_hyps, refs);
      } catch (const UndefinedMetricError& e) {
        report.notes.emplace_back(e.what());
      }
    }
  }
  return report;
}

}  // namespace segsat
