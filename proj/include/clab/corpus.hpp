#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "clab/mathcore.hpp"
#include "clab/tinylm.hpp"

namespace clab {

// Token <-> id registry. Id 0 is always the padding symbol.
class SymbolTable {
 public:
  SymbolTable();

  TokenId intern(std::string_view name);
  std::optional<TokenId> lookup(std::string_view name) const;
  const std::string& text(TokenId id) const;  // throws std::out_of_range
  std::size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct Fact {
  TokenId subject = 0;
  TokenId relation = 0;
  TokenId object = 0;
};

// Synthetic fact base. Every fact renders as the fixed 4-token sentence
// "subject relation object ." so a context-4 model can condition on the
// full left context of the object. Subjects are unique across facts.
struct FactCorpus {
  SymbolTable symbols;
  std::vector<Fact> facts;
  std::vector<TokenSeq> documents;  // aligned with facts
  TokenId period = 0;
};

// A two-alternative retention probe: given "subject relation", is the
// model's log probability higher for the fact's object than for a foil?
struct KrQuestion {
  TokenSeq context;
  TokenSeq true_continuation;
  TokenSeq false_continuation;

  bool operator==(const KrQuestion&) const = default;
};

// Subjects are drawn without replacement from a pool of n_subjects,
// relations and objects with replacement from their pools. One question per
// fact; the foil is the object of a uniformly chosen fact with a different
// object, falling back to an unused pool object when every fact agrees.
struct FactCorpusBundle {
  FactCorpus corpus;
  std::vector<KrQuestion> questions;  // aligned with facts
};

FactCorpusBundle make_fact_corpus(std::size_t n_facts, std::size_t n_subjects,
                                  std::size_t n_objects, RngStream& rng,
                                  std::size_t n_relations = 16);

struct CorpusSplit {
  std::vector<std::size_t> fact_indices;
  std::vector<TokenSeq> documents;
  std::vector<KrQuestion> questions;
};

// n+1 contiguous splits with sizes differing by at most one (earlier splits
// take the remainder). Each split carries the questions of its own facts.
std::vector<CorpusSplit> make_splits(const FactCorpusBundle& bundle,
                                     std::size_t n);

std::string render_document(const SymbolTable& symbols,
                            std::span<const TokenId> doc);

void write_documents_text(const SymbolTable& symbols,
                          const std::vector<TokenSeq>& docs,
                          const std::filesystem::path& file);
void write_symbol_table(const SymbolTable& symbols,
                        const std::filesystem::path& file);

// Three tab-separated columns (context, true, false); token ids within a
// column are space-separated.
void write_questions_tsv(std::span<const KrQuestion> questions,
                         const std::filesystem::path& file);
std::vector<KrQuestion> read_questions_tsv(const std::filesystem::path& file);

}  // namespace clab
