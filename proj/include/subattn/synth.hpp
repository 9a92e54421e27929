#pragma once

#include <string>
#include <vector>

#include "subattn/metrics.hpp"  // TokenSeq

namespace subattn {

// Reserved token ids shared by every corpus and model in the project.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kSentenceDelimId = 4;  // lead-overlap sentence boundary
inline constexpr int kFirstContentId = 5;

struct Instance {
  TokenSeq source;
  TokenSeq target;
};

struct Corpus {
  std::vector<Instance> train;
  std::vector<Instance> val;
  std::vector<Instance> test;
  int vocab_size = 0;
  std::string metadata;  // key=value pairs recorded in the file header

  int total() const {
    return static_cast<int>(train.size() + val.size() + test.size());
  }
};

struct TaskSpec {
  enum class Kind { Copy, KeywordSummarize, RepeatTrap };

  Kind kind = Kind::Copy;
  int vocab_size = 32;        // includes the 5 reserved ids
  int source_len_min = 8;
  int source_len_max = 16;
  double salient_fraction = 0.25;  // keyword task only
  uint64_t seed = 1;
  int n_train = 256;
  int n_val = 32;
  int n_test = 32;

  void validate() const;
};

// All generators are pure functions of the spec; corpora are byte-identical
// across runs and platforms (SplitMix64 streams, one fork per instance).
Corpus gen_copy(const TaskSpec& spec);

// Salient tokens come from a designated sub-vocabulary and appear among
// noise tokens; the target is the salient subsequence in source order.
// Odd-indexed instances bias salient positions toward the source tail to
// probe layout bias.
Corpus gen_keyword_summarize(const TaskSpec& spec);

// Sources repeat a few distractor tokens many times; targets list each
// distinct concept token exactly once.
Corpus gen_repeat_trap(const TaskSpec& spec);

Corpus generate(const TaskSpec& spec);

// Keyword task vocabulary layout: salient ids come first.
int keyword_salient_vocab_end(const TaskSpec& spec);

// Corpus file format: '# key=value ...' header, then one instance per
// line, space-separated source ids TAB space-separated target ids.
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

// Tab-separated token-text corpus; vocabulary assigned by first occurrence
// starting at kFirstContentId. Malformed lines raise with the line number.
Corpus load_tsv(const std::string& path);

}  // namespace subattn
