#include "clab/framework.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>

#include "clab/csvio.hpp"
#include "clab/metrics.hpp"

namespace clab {
namespace {

std::size_t token_count(const std::vector<TokenSeq>& docs) {
  std::size_t n = 0;
  for (const TokenSeq& doc : docs) n += doc.size();
  return n;
}

std::string stage_label(const char* what, std::size_t i) {
  return std::string(what) + "/" + std::to_string(i);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (stages < 2) {
    throw std::invalid_argument("the experiment needs at least two stages");
  }
  if (n_facts < stages + 1) {
    throw std::invalid_argument("not enough facts for one split per stage");
  }
  if (!(prefix_fraction >= 0.0) || !(prefix_fraction <= 1.0)) {
    throw std::invalid_argument("prefix fraction must lie in [0, 1]");
  }
  if (!(smoothing_epsilon >= 0.0) || !std::isfinite(smoothing_epsilon)) {
    throw std::invalid_argument("smoothing epsilon must be nonnegative");
  }
  if (hyper.epochs == 0) {
    throw std::invalid_argument("training needs at least one epoch");
  }
  loss.validate();
  hyper.validate();
  regen_policy.validate();
}

std::vector<TokenSeq> regenerate_split(const TinyLmParams& params,
                                       const std::vector<TokenSeq>& split,
                                       const SamplingPolicy& policy,
                                       double prefix_fraction, RngStream& rng) {
  if (!(prefix_fraction >= 0.0) || !(prefix_fraction <= 1.0)) {
    throw std::invalid_argument("prefix fraction must lie in [0, 1]");
  }
  std::vector<TokenSeq> out;
  out.reserve(split.size());
  for (const TokenSeq& doc : split) {
    const auto keep = std::max<std::size_t>(
        2, static_cast<std::size_t>(
               std::ceil(prefix_fraction * static_cast<double>(doc.size()))));
    if (keep >= doc.size()) {
      out.push_back(doc);
      continue;
    }
    const std::span<const TokenId> prefix(doc.data(), keep);
    out.push_back(lm_generate(params, prefix, doc.size() - keep, policy, rng));
  }
  return out;
}

ExperimentRun run_stages(const ExperimentConfig& config,
                         const std::filesystem::path& artifacts_dir) {
  config.validate();
  const bool dump = !artifacts_dir.empty();
  if (dump) std::filesystem::create_directories(artifacts_dir);

  RngStream corpus_rng = RngStream::from_label(config.seed, "corpus");
  const FactCorpusBundle bundle =
      make_fact_corpus(config.n_facts, config.n_subjects, config.n_objects,
                       corpus_rng, config.n_relations);
  const std::vector<CorpusSplit> splits = make_splits(bundle, config.stages);

  ExperimentRun run;
  run.config = config;
  run.vocab = bundle.corpus.symbols.size();

  if (dump) {
    write_documents_text(bundle.corpus.symbols, bundle.corpus.documents,
                         artifacts_dir / "corpus.txt");
    write_symbol_table(bundle.corpus.symbols, artifacts_dir / "symbols.tsv");
    write_questions_tsv(bundle.questions, artifacts_dir / "questions.tsv");
  }

  RngStream init_rng = RngStream::from_label(config.seed, "init");
  TinyLmParams params = lm_init(run.vocab, config.context, config.embed_dim,
                                config.hidden_dim, init_rng);

  const std::size_t parts = config.stages + 1;
  std::vector<std::vector<TokenSeq>> current(parts);
  std::vector<std::size_t> generation(parts, 0);
  for (std::size_t k = 0; k < parts; ++k) current[k] = splits[k].documents;

  const std::vector<std::uint64_t> vocab_support = unigram_support(run.vocab);

  for (std::size_t i = 0; i < parts; ++i) {
    StageRecord record;
    record.stage = i;

    std::vector<TokenSeq> train_docs;
    for (std::size_t k = 0; k <= i; ++k) {
      train_docs.insert(train_docs.end(), current[k].begin(),
                        current[k].end());
      record.split_generation.push_back(generation[k]);
      const std::size_t docs = current[k].size();
      const std::size_t tokens = token_count(current[k]);
      if (generation[k] == 0) {
        record.real_docs += docs;
        record.real_tokens += tokens;
      } else {
        record.synthetic_docs += docs;
        record.synthetic_tokens += tokens;
      }
    }

    RngStream train_rng =
        RngStream::from_label(config.seed, stage_label("train", i));
    double masked_sum = 0.0;
    double loss_sum = 0.0;
    for (std::size_t e = 0; e < config.hyper.epochs; ++e) {
      const EpochStats stats =
          lm_train_epoch(params, train_docs, config.loss, config.hyper,
                         train_rng);
      masked_sum += stats.masked_fraction;
      loss_sum += stats.mean_loss;
    }
    record.masked_fraction = masked_sum / static_cast<double>(config.hyper.epochs);
    record.mean_loss = loss_sum / static_cast<double>(config.hyper.epochs);

    std::vector<KrQuestion> all_questions;
    for (std::size_t k = 0; k <= i; ++k) {
      record.kr_split.push_back(kr_score(params, splits[k].questions));
      all_questions.insert(all_questions.end(), splits[k].questions.begin(),
                           splits[k].questions.end());
    }
    record.kr_total = kr_score(params, all_questions);

    // hand every split the stage model has seen back to it once more
    for (std::size_t k = 0; k <= i; ++k) {
      RngStream regen_rng = RngStream::from_label(
          config.seed, stage_label("regen", i) + "/" + std::to_string(k));
      current[k] = regenerate_split(params, current[k], config.regen_policy,
                                    config.prefix_fraction, regen_rng);
      ++generation[k];
      if (dump) {
        write_documents_text(
            bundle.corpus.symbols, current[k],
            artifacts_dir / ("regen_stage" + std::to_string(i) + "_split" +
                             std::to_string(k) + ".txt"));
      }
    }

    const SmoothedDistribution orig_uni = ngram_distribution(
        splits[0].documents, 1, vocab_support, config.smoothing_epsilon);
    const SmoothedDistribution regen_uni = ngram_distribution(
        current[0], 1, vocab_support, config.smoothing_epsilon);
    record.kl_unigram = kl_divergence(orig_uni, regen_uni);

    const std::vector<std::uint64_t> bi_support =
        bigram_support(splits[0].documents, current[0]);
    const SmoothedDistribution orig_bi = ngram_distribution(
        splits[0].documents, 2, bi_support, config.smoothing_epsilon);
    const SmoothedDistribution regen_bi = ngram_distribution(
        current[0], 2, bi_support, config.smoothing_epsilon);
    record.kl_bigram = kl_divergence(orig_bi, regen_bi);

    RngStream conf_rng =
        RngStream::from_label(config.seed, stage_label("confidence", i));
    const std::vector<TokenSeq> self_docs =
        regenerate_split(params, splits[0].documents, SamplingPolicy::greedy(),
                         config.prefix_fraction, conf_rng);
    record.conf_self = confidence_profile(params, self_docs).mean;
    record.conf_heldout =
        i + 1 < parts
            ? confidence_profile(params, splits[i + 1].documents).mean
            : std::numeric_limits<double>::quiet_NaN();

    if (dump) {
      save_checkpoint(params, artifacts_dir / ("checkpoint_stage" +
                                               std::to_string(i) + ".bin"));
    }
    run.records.push_back(std::move(record));
  }

  run.final_params = std::move(params);
  return run;
}

void write_stage_csv(const ExperimentRun& run,
                     const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "stage,real_docs,synthetic_docs,real_tokens,synthetic_tokens,"
         "kr_split0,kr_total,kl_unigram,kl_bigram,conf_self,conf_heldout,"
         "masked_fraction,mean_loss\n";
  for (const StageRecord& r : run.records) {
    out << r.stage << ',' << r.real_docs << ',' << r.synthetic_docs << ','
        << r.real_tokens << ',' << r.synthetic_tokens << ','
        << fmt12(r.kr_split.at(0)) << ',' << fmt12(r.kr_total) << ','
        << fmt12(r.kl_unigram) << ',' << fmt12(r.kl_bigram) << ','
        << fmt12(r.conf_self) << ',' << fmt12(r.conf_heldout) << ','
        << fmt12(r.masked_fraction) << ',' << fmt12(r.mean_loss) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

void write_kr_matrix_csv(const ExperimentRun& run,
                         const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "stage,split,generation_tag,kr_score\n";
  for (const StageRecord& r : run.records) {
    for (std::size_t k = 0; k < r.kr_split.size(); ++k) {
      out << r.stage << ',' << k << ',' << r.split_generation.at(k) << ','
          << fmt12(r.kr_split[k]) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + file.string());
}

}  // namespace clab
