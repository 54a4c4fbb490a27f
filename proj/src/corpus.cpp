#include "clab/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace clab {
namespace {

std::string pool_name(char prefix, std::size_t index) {
  return prefix + std::to_string(index);
}

TokenSeq parse_id_list(const std::string& field) {
  TokenSeq out;
  std::istringstream in(field);
  std::uint64_t id = 0;
  while (in >> id) out.push_back(static_cast<TokenId>(id));
  if (!in.eof()) throw std::runtime_error("bad token id in question file");
  return out;
}

std::string format_id_list(std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace

SymbolTable::SymbolTable() { intern("<pad>"); }

TokenId SymbolTable::intern(std::string_view name) {
  const std::string key(name);
  const auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  const TokenId id = static_cast<TokenId>(names_.size());
  names_.push_back(key);
  ids_.emplace(key, id);
  return id;
}

std::optional<TokenId> SymbolTable::lookup(std::string_view name) const {
  const auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& SymbolTable::text(TokenId id) const {
  if (id >= names_.size()) {
    throw std::out_of_range("symbol id out of range");
  }
  return names_[id];
}

FactCorpusBundle make_fact_corpus(std::size_t n_facts, std::size_t n_subjects,
                                  std::size_t n_objects, RngStream& rng,
                                  std::size_t n_relations) {
  if (n_facts == 0) throw std::invalid_argument("need at least one fact");
  if (n_subjects < n_facts) {
    throw std::invalid_argument(
        "subject pool must be at least as large as the fact count");
  }
  if (n_objects < 2) {
    throw std::invalid_argument(
        "need at least two objects to build a false continuation");
  }
  if (n_relations == 0) throw std::invalid_argument("need at least one relation");

  FactCorpusBundle bundle;
  FactCorpus& corpus = bundle.corpus;
  corpus.period = corpus.symbols.intern(".");

  // partial Fisher-Yates: the first n_facts entries are a uniform
  // without-replacement draw from the subject pool
  std::vector<std::size_t> subject_ids(n_subjects);
  std::iota(subject_ids.begin(), subject_ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < n_facts; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.next_u64() % (n_subjects - i));
    std::swap(subject_ids[i], subject_ids[j]);
  }

  corpus.facts.reserve(n_facts);
  corpus.documents.reserve(n_facts);
  for (std::size_t i = 0; i < n_facts; ++i) {
    Fact fact;
    fact.subject = corpus.symbols.intern(pool_name('s', subject_ids[i]));
    fact.relation = corpus.symbols.intern(
        pool_name('r', static_cast<std::size_t>(rng.next_u64() % n_relations)));
    fact.object = corpus.symbols.intern(
        pool_name('o', static_cast<std::size_t>(rng.next_u64() % n_objects)));
    corpus.facts.push_back(fact);
    corpus.documents.push_back(
        {fact.subject, fact.relation, fact.object, corpus.period});
  }

  bundle.questions.reserve(n_facts);
  for (std::size_t i = 0; i < n_facts; ++i) {
    const Fact& fact = corpus.facts[i];
    KrQuestion q;
    q.context = {fact.subject, fact.relation};
    q.true_continuation = {fact.object};

    std::vector<TokenId> candidates;
    for (std::size_t j = 0; j < n_facts; ++j) {
      if (j != i && corpus.facts[j].object != fact.object) {
        candidates.push_back(corpus.facts[j].object);
      }
    }
    TokenId foil = 0;
    if (!candidates.empty()) {
      foil = candidates[static_cast<std::size_t>(rng.next_u64() %
                                                 candidates.size())];
    } else {
      // every other fact shares this object; use an unused pool object
      std::vector<std::string> unused;
      const std::string true_name = corpus.symbols.text(fact.object);
      for (std::size_t j = 0; j < n_objects; ++j) {
        std::string name = pool_name('o', j);
        if (name != true_name) unused.push_back(std::move(name));
      }
      const std::size_t pick =
          static_cast<std::size_t>(rng.next_u64() % unused.size());
      foil = corpus.symbols.intern(unused[pick]);
    }
    q.false_continuation = {foil};
    bundle.questions.push_back(std::move(q));
  }
  return bundle;
}

std::vector<CorpusSplit> make_splits(const FactCorpusBundle& bundle,
                                     std::size_t n) {
  const std::size_t parts = n + 1;
  const std::size_t total = bundle.corpus.documents.size();
  if (total < parts) {
    throw std::invalid_argument("not enough documents for the split count");
  }
  const std::size_t base = total / parts;
  const std::size_t extra = total % parts;

  std::vector<CorpusSplit> splits(parts);
  std::size_t cursor = 0;
  for (std::size_t k = 0; k < parts; ++k) {
    const std::size_t len = base + (k < extra ? 1 : 0);
    CorpusSplit& split = splits[k];
    for (std::size_t i = 0; i < len; ++i, ++cursor) {
      split.fact_indices.push_back(cursor);
      split.documents.push_back(bundle.corpus.documents[cursor]);
      split.questions.push_back(bundle.questions[cursor]);
    }
  }
  return splits;
}

std::string render_document(const SymbolTable& symbols,
                            std::span<const TokenId> doc) {
  std::string line;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (i) line += ' ';
    line += symbols.text(doc[i]);
  }
  return line;
}

void write_documents_text(const SymbolTable& symbols,
                          const std::vector<TokenSeq>& docs,
                          const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const TokenSeq& doc : docs) out << render_document(symbols, doc) << '\n';
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

void write_symbol_table(const SymbolTable& symbols,
                        const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (std::size_t id = 0; id < symbols.size(); ++id) {
    out << symbols.text(static_cast<TokenId>(id)) << '\t' << id << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

void write_questions_tsv(std::span<const KrQuestion> questions,
                         const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  for (const KrQuestion& q : questions) {
    out << format_id_list(q.context) << '\t'
        << format_id_list(q.true_continuation) << '\t'
        << format_id_list(q.false_continuation) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

std::vector<KrQuestion> read_questions_tsv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::vector<KrQuestion> questions;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos
                               ? std::string::npos
                               : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) {
      throw std::runtime_error("question line needs three columns: " + line);
    }
    KrQuestion q;
    q.context = parse_id_list(line.substr(0, t1));
    q.true_continuation = parse_id_list(line.substr(t1 + 1, t2 - t1 - 1));
    q.false_continuation = parse_id_list(line.substr(t2 + 1));
    if (q.true_continuation.empty() || q.false_continuation.empty()) {
      throw std::runtime_error("question continuations must be nonempty");
    }
    questions.push_back(std::move(q));
  }
  return questions;
}

}  // namespace clab
