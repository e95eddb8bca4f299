#pragma once

// Synthetic token-sequence analogue of masked-LM pretraining under different
// masking policies. Position 0 carries a spurious token A_y (agreeing with the
// label with probability 1 - nu_s); one robust token R_y sits at a uniform
// position in 1..L-1; every other position is noise.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "spur/nnet.hpp"
#include "spur/rng.hpp"

namespace spur {

enum class MaskPolicy { kScratch, kVanilla, kUnmaskRandom, kUnmaskSpurious, kUnknownSpurious };

inline constexpr MaskPolicy kAllPolicies[] = {MaskPolicy::kScratch, MaskPolicy::kVanilla, MaskPolicy::kUnmaskRandom,
                                              MaskPolicy::kUnmaskSpurious, MaskPolicy::kUnknownSpurious};

std::string_view to_string(MaskPolicy policy);
// Throws InvalidArgument for an unknown name.
MaskPolicy parse_mask_policy(std::string_view name);

struct SeqConfig {
  std::size_t length = 8;
  std::size_t vocab = 24;
  double nu_s = 0.1;
  double mask_rate = 0.15;
  std::size_t hidden = 64;
  std::size_t pretrain_corpus = 20000;
  std::size_t train_corpus = 2000;
  std::size_t eval_corpus = 2000;
  std::size_t pretrain_iterations = 4000;
  std::size_t finetune_iterations = 200;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  // Replace the spurious token by UNK at fine-tuning/eval time too for the
  // unknown_spurious policy.
  bool unk_at_finetune = false;

  // Token ids: A0 = 0, A1 = 1, R0 = 2, R1 = 3, noise = 4..vocab-2, UNK = vocab-1.
  static constexpr std::uint32_t spurious(std::size_t y) { return static_cast<std::uint32_t>(y); }
  static constexpr std::uint32_t robust(std::size_t y) { return static_cast<std::uint32_t>(2 + y); }
  std::uint32_t unk() const { return static_cast<std::uint32_t>(vocab - 1); }
  std::size_t noise_count() const { return vocab - 5; }
  std::uint32_t noise(std::size_t i) const { return static_cast<std::uint32_t>(4 + i); }
  std::size_t input_width() const { return length * vocab; }

  // Throws ConfigError on length < 2, vocab < 6, nu_s outside [0, 0.5], a
  // mask rate outside (0, 1) or zero sizes.
  void validate() const;
};

struct Sequence {
  std::vector<std::uint32_t> tokens;
  std::size_t label = 0;
  std::size_t robust_position = 1;
};

std::vector<Sequence> gen_corpus(const SeqConfig& config, Stream& stream, std::size_t n, bool shifted);

struct MaskedInput {
  // Tokens after any replacement; masked positions keep their original token
  // here but contribute no input.
  std::vector<std::uint32_t> tokens;
  std::vector<bool> masked;
  std::vector<std::size_t> loss_positions;

  // Active one-hot coordinates (position * vocab + token) of unmasked positions.
  std::vector<std::uint32_t> active(std::size_t vocab) const;
};

MaskedInput apply_policy(const SeqConfig& config, const Sequence& seq, MaskPolicy policy, Stream& stream);

// Encoder-only view of a sequence for fine-tuning and evaluation.
std::vector<std::uint32_t> encode_unmasked(const SeqConfig& config, std::span<const std::uint32_t> tokens);

struct EncoderResult {
  DenseMatrix encoder;  // hidden x (length * vocab)
  double masked_ce = 0.0;
  double floor = 0.0;
};

// Mean cross-entropy (nats) at the loss positions of the given masked inputs.
double masked_lm_loss(const SeqConfig& config, const DenseMatrix& encoder, const DenseMatrix& head,
                      std::span<const MaskedInput> inputs, std::span<const Sequence> originals);
// Bayes conditional entropy at the same positions, from exact posteriors over
// (label, robust position) given the visible tokens.
double masked_lm_floor(const SeqConfig& config, std::span<const MaskedInput> inputs,
                       std::span<const Sequence> originals);

// MLM pretraining of a bias-free linear encoder with a per-position softmax
// head (discarded afterwards). Throws InvalidArgument for kScratch.
EncoderResult pretrain_encoder(const SeqConfig& config, std::span<const Sequence> corpus, MaskPolicy policy,
                               DenseMatrix init_encoder, Stream& stream);

struct PolicyRun {
  MaskPolicy policy;
  std::size_t seed;
  double acc_in = 0.0;
  double acc_shifted = 0.0;
  double reliance = 0.0;
  double fpr_analog = 0.0;
  double masked_ce = 0.0;  // pretraining loss; 0 for scratch
  double masked_floor = 0.0;
};

struct PolicySummary {
  MaskPolicy policy;
  double mean[4];  // acc_in, acc_shifted, reliance, fpr_analog
  double sd[4];
};

struct DirectionalCheck {
  std::string name;
  std::size_t wins = 0;
  std::size_t seeds = 0;
  std::size_t required = 0;
  bool pass() const { return wins >= required; }
};

struct PolicySuiteReport {
  std::vector<PolicyRun> runs;  // policy-major, seeds ascending
  std::vector<PolicySummary> summaries;
  std::vector<DirectionalCheck> checks;
  // Expected masked tokens per sequence for policies 2-5, by exact formula.
  std::vector<std::pair<MaskPolicy, double>> expected_masked;

  std::string to_csv() const;
  nlohmann::json summary() const;
};

double expected_masked_tokens(const SeqConfig& config, MaskPolicy policy);

// Throws ConfigError on fewer than 5 seeds.
PolicySuiteReport run_policy_suite(const SeqConfig& config, std::size_t seeds, std::uint64_t master_seed,
                                   std::size_t workers = 1,
                                   std::span<const MaskPolicy> policies = kAllPolicies);

}  // namespace spur
