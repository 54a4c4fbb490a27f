#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "clab/corpus.hpp"
#include "clab/losses.hpp"
#include "clab/tinylm.hpp"

namespace clab {

// A staged self-training experiment over a fresh fact corpus. The corpus is
// partitioned into stages+1 splits; stage i trains on splits 0..i, where
// every split older than i has been regenerated by each intervening model
// (split k has passed through i-k rounds of regeneration by stage i's
// training). After training, the stage model regenerates all of its splits
// once more for the next stage.
struct ExperimentConfig {
  std::size_t stages = 5;  // produces stages+1 stage records
  LossSpec loss = LossSpec::cross_entropy();

  std::size_t n_facts = 200;
  std::size_t n_subjects = 200;
  std::size_t n_objects = 18;
  std::size_t n_relations = 16;

  std::size_t context = 4;
  std::size_t embed_dim = 16;
  std::size_t hidden_dim = 32;
  TrainHyper hyper;

  SamplingPolicy regen_policy = SamplingPolicy::temperature_of(1.0);
  double prefix_fraction = 0.5;
  double smoothing_epsilon = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;
};

struct StageRecord {
  std::size_t stage = 0;

  std::size_t real_docs = 0;
  std::size_t synthetic_docs = 0;
  std::size_t real_tokens = 0;
  std::size_t synthetic_tokens = 0;

  std::vector<double> kr_split;  // retention per split k <= stage
  double kr_total = 0.0;         // over the union of those questions

  double kl_unigram = 0.0;  // original split 0 vs its freshest regeneration
  double kl_bigram = 0.0;

  double conf_self = 0.0;     // mean confidence on own greedy regenerations
  double conf_heldout = 0.0;  // on the next fresh split; NaN at the last stage

  double masked_fraction = 0.0;  // epoch means at this stage
  double mean_loss = 0.0;

  // regeneration count of each training split; split_generation[k] == stage-k
  std::vector<std::size_t> split_generation;
};

struct ExperimentRun {
  ExperimentConfig config;
  std::size_t vocab = 0;
  std::vector<StageRecord> records;
  TinyLmParams final_params;
};

// Keeps the first max(2, ceil(prefix_fraction*len)) tokens of every document
// verbatim and samples the rest back to the original length.
std::vector<TokenSeq> regenerate_split(const TinyLmParams& params,
                                       const std::vector<TokenSeq>& split,
                                       const SamplingPolicy& policy,
                                       double prefix_fraction, RngStream& rng);

// Runs all stages. When artifacts_dir is nonempty, writes the corpus files,
// a checkpoint per stage, and text dumps of each stage's regenerations.
ExperimentRun run_stages(const ExperimentConfig& config,
                         const std::filesystem::path& artifacts_dir = {});

// One row per stage; columns:
// stage,real_docs,synthetic_docs,real_tokens,synthetic_tokens,kr_split0,
// kr_total,kl_unigram,kl_bigram,conf_self,conf_heldout,masked_fraction,
// mean_loss
void write_stage_csv(const ExperimentRun& run,
                     const std::filesystem::path& file);

// One row per (stage, split<=stage); columns:
// stage,split,generation_tag,kr_score
void write_kr_matrix_csv(const ExperimentRun& run,
                         const std::filesystem::path& file);

}  // namespace clab
