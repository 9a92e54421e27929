#include "subattn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "subattn/rng.hpp"

namespace subattn {

void TaskSpec::validate() const {
  if (vocab_size < kFirstContentId + 2)
    throw std::invalid_argument("vocab too small for reserved ids");
  if (source_len_min < 1 || source_len_max < source_len_min)
    throw std::invalid_argument("bad source length range");
  if (salient_fraction <= 0.0 || salient_fraction >= 1.0)
    throw std::invalid_argument("salient fraction must be in (0,1)");
  if (n_train < 1 || n_val < 1 || n_test < 1)
    throw std::invalid_argument("split sizes must be >= 1");
}

namespace {

// Delimiters every 8-12 tokens, so lead-overlap has sentences to cut at.
TokenSeq with_delimiters(const TokenSeq& tokens, SplitMix64& rng) {
  TokenSeq out;
  out.reserve(tokens.size() + tokens.size() / 8 + 1);
  int until = static_cast<int>(rng.next_int(8, 12));
  for (int tok : tokens) {
    out.push_back(tok);
    if (--until == 0) {
      out.push_back(kSentenceDelimId);
      until = static_cast<int>(rng.next_int(8, 12));
    }
  }
  return out;
}

std::string kind_name(TaskSpec::Kind kind) {
  switch (kind) {
    case TaskSpec::Kind::Copy: return "copy";
    case TaskSpec::Kind::KeywordSummarize: return "keyword-summarize";
    case TaskSpec::Kind::RepeatTrap: return "repeat-trap";
  }
  return "?";
}

Corpus make_corpus(const TaskSpec& spec,
                   const std::function<Instance(SplitMix64&, int)>& gen) {
  spec.validate();
  Corpus corpus;
  corpus.vocab_size = spec.vocab_size;
  corpus.metadata = "task=" + kind_name(spec.kind) +
                    " vocab=" + std::to_string(spec.vocab_size) +
                    " seed=" + std::to_string(spec.seed) + " rng=splitmix64";
  SplitMix64 root(spec.seed);
  int index = 0;
  auto fill = [&](std::vector<Instance>& split, int count) {
    for (int k = 0; k < count; ++k, ++index) {
      SplitMix64 rng = root.fork(static_cast<uint64_t>(index));
      split.push_back(gen(rng, index));
    }
  };
  fill(corpus.train, spec.n_train);
  fill(corpus.val, spec.n_val);
  fill(corpus.test, spec.n_test);
  return corpus;
}

}  // namespace

Corpus gen_copy(const TaskSpec& spec) {
  return make_corpus(spec, [&](SplitMix64& rng, int) {
    int len = static_cast<int>(
        rng.next_int(spec.source_len_min, spec.source_len_max));
    TokenSeq src;
    for (int i = 0; i < len; ++i)
      src.push_back(static_cast<int>(
          rng.next_int(kFirstContentId, spec.vocab_size - 1)));
    return Instance{src, src};
  });
}

int keyword_salient_vocab_end(const TaskSpec& spec) {
  int content = spec.vocab_size - kFirstContentId;
  return kFirstContentId + std::max(1, content / 3);
}

Corpus gen_keyword_summarize(const TaskSpec& spec) {
  const int salient_end = keyword_salient_vocab_end(spec);
  return make_corpus(spec, [&, salient_end](SplitMix64& rng, int index) {
    int len = static_cast<int>(
        rng.next_int(spec.source_len_min, spec.source_len_max));
    int n_salient = std::max(
        1, static_cast<int>(std::lround(spec.salient_fraction * len)));
    n_salient = std::min(n_salient, len);

    // Choose salient positions; odd instances bias them into the tail half.
    bool tail_biased = index % 2 == 1;
    std::vector<int> positions;
    std::vector<char> used(len, 0);
    while (static_cast<int>(positions.size()) < n_salient) {
      int lo = tail_biased ? len / 2 : 0;
      int pos = static_cast<int>(rng.next_int(lo, len - 1));
      if (!used[pos]) {
        used[pos] = 1;
        positions.push_back(pos);
      }
    }
    std::sort(positions.begin(), positions.end());

    TokenSeq src(len);
    for (int i = 0; i < len; ++i)
      src[i] = used[i]
                   ? static_cast<int>(rng.next_int(kFirstContentId,
                                                   salient_end - 1))
                   : static_cast<int>(
                         rng.next_int(salient_end, spec.vocab_size - 1));
    TokenSeq tgt;
    for (int pos : positions) tgt.push_back(src[pos]);
    return Instance{with_delimiters(src, rng), tgt};
  });
}

Corpus gen_repeat_trap(const TaskSpec& spec) {
  return make_corpus(spec, [&](SplitMix64& rng, int) {
    int len = static_cast<int>(
        rng.next_int(spec.source_len_min, spec.source_len_max));

    // A third of the content vocabulary serves as distractors.
    int content = spec.vocab_size - kFirstContentId;
    int distractor_end = kFirstContentId + std::max(1, content / 3);

    // Pick distinct concept tokens; the rest of the source is a couple of
    // distractors repeated over and over.
    int n_concepts = std::max(2, len / 5);
    std::vector<int> concepts;
    std::vector<char> taken(spec.vocab_size, 0);
    while (static_cast<int>(concepts.size()) < n_concepts) {
      int tok =
          static_cast<int>(rng.next_int(distractor_end, spec.vocab_size - 1));
      if (!taken[tok]) {
        taken[tok] = 1;
        concepts.push_back(tok);
      }
    }
    int n_distractors = static_cast<int>(rng.next_int(1, 2));
    std::vector<int> distractors;
    for (int d = 0; d < n_distractors; ++d)
      distractors.push_back(static_cast<int>(
          rng.next_int(kFirstContentId, distractor_end - 1)));

    TokenSeq src;
    size_t next_concept = 0;
    for (int i = 0; i < len; ++i) {
      bool place_concept =
          next_concept < concepts.size() &&
          (len - i <= static_cast<int>(concepts.size() - next_concept) ||
           rng.next_double() < double(concepts.size()) / len * 1.3);
      if (place_concept)
        src.push_back(concepts[next_concept++]);
      else
        src.push_back(distractors[static_cast<size_t>(
            rng.next_int(0, n_distractors - 1))]);
    }
    TokenSeq tgt(concepts.begin(), concepts.end());
    return Instance{with_delimiters(src, rng), tgt};
  });
}

Corpus generate(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskSpec::Kind::Copy: return gen_copy(spec);
    case TaskSpec::Kind::KeywordSummarize: return gen_keyword_summarize(spec);
    case TaskSpec::Kind::RepeatTrap: return gen_repeat_trap(spec);
  }
  throw std::logic_error("unknown task kind");
}

namespace {

void write_split(std::ostream& out, const std::vector<Instance>& split) {
  for (const Instance& inst : split) {
    for (size_t i = 0; i < inst.source.size(); ++i)
      out << (i ? " " : "") << inst.source[i];
    out << '\t';
    for (size_t i = 0; i < inst.target.size(); ++i)
      out << (i ? " " : "") << inst.target[i];
    out << '\n';
  }
}

TokenSeq parse_ids(const std::string& text, int line_no) {
  TokenSeq ids;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    try {
      ids.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw std::runtime_error("malformed token '" + tok + "' on line " +
                               std::to_string(line_no));
    }
  }
  return ids;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "# " << corpus.metadata << " train=" << corpus.train.size()
      << " val=" << corpus.val.size() << " test=" << corpus.test.size()
      << '\n';
  write_split(out, corpus.train);
  write_split(out, corpus.val);
  write_split(out, corpus.test);
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind("# ", 0) != 0)
    throw std::runtime_error("missing corpus header in " + path);

  Corpus corpus;
  corpus.metadata = header.substr(2);
  size_t n_train = 0, n_val = 0, n_test = 0;
  std::istringstream hs(corpus.metadata);
  std::string kv;
  while (hs >> kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (key == "train") n_train = std::stoul(value);
    if (key == "val") n_val = std::stoul(value);
    if (key == "test") n_test = std::stoul(value);
    if (key == "vocab") corpus.vocab_size = std::stoi(value);
  }

  std::string line;
  int line_no = 1;
  std::vector<Instance> all;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("missing tab on line " +
                               std::to_string(line_no));
    all.push_back({parse_ids(line.substr(0, tab), line_no),
                   parse_ids(line.substr(tab + 1), line_no)});
  }
  if (all.size() != n_train + n_val + n_test)
    throw std::runtime_error("instance count does not match header in " +
                             path);
  corpus.train.assign(all.begin(), all.begin() + n_train);
  corpus.val.assign(all.begin() + n_train, all.begin() + n_train + n_val);
  corpus.test.assign(all.begin() + n_train + n_val, all.end());
  return corpus;
}

Corpus load_tsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  Corpus corpus;
  std::map<std::string, int> vocab;
  auto id_of = [&](const std::string& tok) {
    auto [it, inserted] =
        vocab.emplace(tok, kFirstContentId + static_cast<int>(vocab.size()));
    return it->second;
  };
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw std::runtime_error("missing tab on line " +
                               std::to_string(line_no) + " of " + path);
    Instance inst;
    std::istringstream src(line.substr(0, tab)), tgt(line.substr(tab + 1));
    std::string tok;
    while (src >> tok) inst.source.push_back(id_of(tok));
    while (tgt >> tok) inst.target.push_back(id_of(tok));
    if (inst.source.empty() || inst.target.empty())
      throw std::runtime_error("empty side on line " +
                               std::to_string(line_no) + " of " + path);
    corpus.train.push_back(std::move(inst));
  }
  corpus.vocab_size = kFirstContentId + static_cast<int>(vocab.size());
  corpus.metadata = "task=tsv vocab=" + std::to_string(corpus.vocab_size);
  return corpus;
}

}  // namespace subattn
