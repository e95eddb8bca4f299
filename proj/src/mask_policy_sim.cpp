#include "spur/mask_policy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "spur/errors.hpp"
#include "spur/kernels.hpp"
#include "spur/parallel.hpp"

namespace spur {

std::string_view to_string(MaskPolicy policy) {
  switch (policy) {
    case MaskPolicy::kScratch: return "scratch";
    case MaskPolicy::kVanilla: return "vanilla";
    case MaskPolicy::kUnmaskRandom: return "unmask_random";
    case MaskPolicy::kUnmaskSpurious: return "unmask_spurious";
    case MaskPolicy::kUnknownSpurious: return "unknown_spurious";
  }
  return "?";
}

MaskPolicy parse_mask_policy(std::string_view name) {
  for (MaskPolicy p : kAllPolicies)
    if (to_string(p) == name) return p;
  throw InvalidArgument("unknown masking policy '" + std::string(name) + "'");
}

void SeqConfig::validate() const {
  if (length < 2) throw ConfigError("sequence length must be at least 2");
  if (vocab < 6) throw ConfigError("vocabulary needs at least 6 tokens (A0, A1, R0, R1, noise, UNK)");
  if (!(nu_s >= 0.0 && nu_s <= 0.5)) throw ConfigError("nu_s must lie in [0, 0.5]");
  if (!(mask_rate > 0.0 && mask_rate < 1.0)) throw ConfigError("mask rate must lie in (0, 1)");
  if (hidden == 0 || pretrain_corpus == 0 || train_corpus == 0 || eval_corpus == 0 || batch_size == 0 ||
      finetune_iterations == 0 || !(learning_rate > 0.0))
    throw ConfigError("sequence simulation sizes must be positive");
}

std::vector<Sequence> gen_corpus(const SeqConfig& config, Stream& stream, std::size_t n, bool shifted) {
  std::vector<Sequence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sequence s;
    s.label = stream.index(2);
    s.tokens.resize(config.length);
    if (shifted)
      s.tokens[0] = SeqConfig::spurious(stream.index(2));
    else
      s.tokens[0] = SeqConfig::spurious(stream.bernoulli(config.nu_s) ? 1 - s.label : s.label);
    s.robust_position = 1 + stream.index(config.length - 1);
    for (std::size_t p = 1; p < config.length; ++p)
      s.tokens[p] = p == s.robust_position ? SeqConfig::robust(s.label) : config.noise(stream.index(config.noise_count()));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::uint32_t> MaskedInput::active(std::size_t vocab) const {
  std::vector<std::uint32_t> out;
  for (std::size_t p = 0; p < tokens.size(); ++p)
    if (!masked[p]) out.push_back(static_cast<std::uint32_t>(p * vocab + tokens[p]));
  return out;
}

MaskedInput apply_policy(const SeqConfig& config, const Sequence& seq, MaskPolicy policy, Stream& stream) {
  MaskedInput in;
  in.tokens = seq.tokens;
  in.masked.assign(seq.tokens.size(), false);
  if (policy == MaskPolicy::kScratch) return in;
  for (std::size_t p = 0; p < in.masked.size(); ++p) in.masked[p] = stream.bernoulli(config.mask_rate);
  switch (policy) {
    case MaskPolicy::kUnmaskRandom:
      in.masked[stream.index(in.masked.size())] = false;
      break;
    case MaskPolicy::kUnmaskSpurious:
      in.masked[0] = false;
      break;
    case MaskPolicy::kUnknownSpurious:
      in.tokens[0] = config.unk();
      in.masked[0] = false;
      break;
    default:
      break;
  }
  for (std::size_t p = 0; p < in.masked.size(); ++p)
    if (in.masked[p]) in.loss_positions.push_back(p);
  return in;
}

std::vector<std::uint32_t> encode_unmasked(const SeqConfig& config, std::span<const std::uint32_t> tokens) {
  std::vector<std::uint32_t> out(tokens.size());
  for (std::size_t p = 0; p < tokens.size(); ++p) out[p] = static_cast<std::uint32_t>(p * config.vocab + tokens[p]);
  return out;
}

double expected_masked_tokens(const SeqConfig& config, MaskPolicy policy) {
  const double l = static_cast<double>(config.length), r = config.mask_rate;
  switch (policy) {
    case MaskPolicy::kScratch: return 0.0;
    case MaskPolicy::kVanilla: return r * l;
    default: return r * (l - 1.0);
  }
}

namespace {

void encode(const DenseMatrix& encoder, std::span<const std::uint32_t> active, std::vector<double>& h) {
  h.assign(encoder.rows, 0.0);
  for (std::size_t r = 0; r < encoder.rows; ++r)
    for (std::uint32_t j : active) h[r] += encoder(r, j);
}

// log-softmax of the head block for position p, written to out (size vocab).
void position_log_probs(const DenseMatrix& head, std::size_t p, std::size_t vocab, std::span<const double> h,
                        std::vector<double>& out) {
  out.resize(vocab);
  for (std::size_t t = 0; t < vocab; ++t) out[t] = kernels::dot(head.row(p * vocab + t), h);
  const double mx = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (double v : out) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  for (double& v : out) v -= lse;
}

}  // namespace

double masked_lm_loss(const SeqConfig& config, const DenseMatrix& encoder, const DenseMatrix& head,
                      std::span<const MaskedInput> inputs, std::span<const Sequence> originals) {
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> h, lp;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].loss_positions.empty()) continue;
    encode(encoder, inputs[i].active(config.vocab), h);
    for (std::size_t p : inputs[i].loss_positions) {
      position_log_probs(head, p, config.vocab, h, lp);
      total -= lp[originals[i].tokens[p]];
      ++count;
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

double masked_lm_floor(const SeqConfig& config, std::span<const MaskedInput> inputs,
                       std::span<const Sequence> originals) {
  const std::size_t len = config.length;
  const double noise_p = 1.0 / static_cast<double>(config.noise_count());
  double total = 0.0;
  std::size_t count = 0;
  std::vector<double> w(2 * len, 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const MaskedInput& in = inputs[i];
    if (in.loss_positions.empty()) continue;
    // Posterior weight of (label y, robust position r).
    double mass = 0.0;
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t r = 1; r < len; ++r) {
        double lik = 1.0;
        if (!in.masked[0] && in.tokens[0] != config.unk())
          lik *= in.tokens[0] == SeqConfig::spurious(y) ? 1.0 - config.nu_s : config.nu_s;
        for (std::size_t p = 1; p < len && lik > 0.0; ++p) {
          if (in.masked[p]) continue;
          if (p == r)
            lik *= in.tokens[p] == SeqConfig::robust(y) ? 1.0 : 0.0;
          else
            lik *= in.tokens[p] >= 4 && in.tokens[p] < config.unk() ? noise_p : 0.0;
        }
        w[y * len + r] = lik;
        mass += lik;
      }
    for (std::size_t p : in.loss_positions) {
      const std::uint32_t truth = originals[i].tokens[p];
      double prob = 0.0;
      for (std::size_t y = 0; y < 2; ++y)
        for (std::size_t r = 1; r < len; ++r) {
          const double wy = w[y * len + r] / mass;
          if (wy == 0.0) continue;
          double pt;
          if (p == 0)
            pt = truth == SeqConfig::spurious(y) ? 1.0 - config.nu_s : config.nu_s;
          else if (p == r)
            pt = truth == SeqConfig::robust(y) ? 1.0 : 0.0;
          else
            pt = truth >= 4 && truth < config.unk() ? noise_p : 0.0;
          prob += wy * pt;
        }
      total -= std::log(prob);
      ++count;
    }
  }
  return count > 0 ? total / static_cast<double>(count) : 0.0;
}

EncoderResult pretrain_encoder(const SeqConfig& config, std::span<const Sequence> corpus, MaskPolicy policy,
                               DenseMatrix init_encoder, Stream& stream) {
  if (policy == MaskPolicy::kScratch) throw InvalidArgument("scratch policy has no pretraining");
  if (corpus.empty()) throw InvalidArgument("empty pretraining corpus");
  const std::size_t vocab = config.vocab, width = config.input_width(), hidden = config.hidden;
  if (init_encoder.rows != hidden || init_encoder.cols != width) throw InvalidArgument("encoder shape mismatch");

  // Encoder and head share one Network so Adam state lives in one place.
  Network net({width, hidden, width});
  net.layer(0) = std::move(init_encoder);
  {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (double& x : net.layer(1).data) x = stream.uniform(-bound, bound);
  }
  Adam adam(net, {config.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<DenseMatrix> grads{DenseMatrix(hidden, width), DenseMatrix(width, hidden)};
  std::vector<double> h, dh, lp;
  std::vector<MaskedInput> batch(config.batch_size);
  std::vector<std::size_t> picks(config.batch_size);

  for (std::size_t iter = 0; iter < config.pretrain_iterations; ++iter) {
    std::size_t n_loss = 0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      picks[b] = stream.index(corpus.size());
      batch[b] = apply_policy(config, corpus[picks[b]], policy, stream);
      n_loss += batch[b].loss_positions.size();
    }
    if (n_loss == 0) continue;
    for (auto& g : grads) std::fill(g.data.begin(), g.data.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(n_loss);
    const DenseMatrix& enc = net.layer(0);
    const DenseMatrix& head = net.layer(1);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const MaskedInput& in = batch[b];
      if (in.loss_positions.empty()) continue;
      const auto active = in.active(vocab);
      encode(enc, active, h);
      dh.assign(hidden, 0.0);
      for (std::size_t p : in.loss_positions) {
        position_log_probs(head, p, vocab, h, lp);
        const std::uint32_t truth = corpus[picks[b]].tokens[p];
        for (std::size_t t = 0; t < vocab; ++t) {
          const double d = (std::exp(lp[t]) - (t == truth ? 1.0 : 0.0)) * inv;
          const std::size_t row = p * vocab + t;
          kernels::axpy(d, h, grads[1].row(row));
          kernels::axpy(d, head.row(row), dh);
        }
      }
      for (std::size_t r = 0; r < hidden; ++r)
        for (std::uint32_t j : active) grads[0](r, j) += dh[r];
    }
    adam.step(net, grads);
  }

  EncoderResult res;
  // Held-out masked evaluation on a fresh draw of the same corpus.
  std::vector<MaskedInput> eval;
  std::vector<Sequence> originals;
  const std::size_t n_eval = std::min<std::size_t>(corpus.size(), 4000);
  for (std::size_t i = 0; i < n_eval; ++i) {
    originals.push_back(corpus[stream.index(corpus.size())]);
    eval.push_back(apply_policy(config, originals.back(), policy, stream));
  }
  res.masked_ce = masked_lm_loss(config, net.layer(0), net.layer(1), eval, originals);
  res.floor = masked_lm_floor(config, eval, originals);
  res.encoder = std::move(net.layer(0));
  return res;
}

namespace {

std::size_t predict(const Network& net, std::span<const std::uint32_t> active) {
  const auto logits = net.forward_sparse(active);
  return logits[1] > logits[0] ? 1 : 0;
}

enum StreamTag : std::uint64_t { kCorpus = 0xC0, kInit = 0x1A, kFinetune = 0xF7, kPretrain = 0x50 };

PolicyRun run_one(const SeqConfig& config, MaskPolicy policy, std::size_t seed, std::uint64_t master) {
  Stream corpus_stream = Stream::derive(master, kCorpus, seed);
  const auto pre_corpus = gen_corpus(config, corpus_stream, config.pretrain_corpus, false);
  const auto train = gen_corpus(config, corpus_stream, config.train_corpus, false);
  const auto eval_in = gen_corpus(config, corpus_stream, config.eval_corpus, false);
  const auto eval_shift = gen_corpus(config, corpus_stream, config.eval_corpus, true);

  Stream init_stream = Stream::derive(master, kInit, seed);
  Network net = init_network({config.input_width(), config.hidden, 2}, init_stream);

  PolicyRun run{policy, seed};
  if (policy != MaskPolicy::kScratch) {
    Stream pre_stream = Stream::derive(master, kPretrain + static_cast<std::uint64_t>(policy), seed);
    EncoderResult enc = pretrain_encoder(config, pre_corpus, policy, net.layer(0), pre_stream);
    net.layer(0) = std::move(enc.encoder);
    run.masked_ce = enc.masked_ce;
    run.masked_floor = enc.floor;
  }

  const bool unk = config.unk_at_finetune && policy == MaskPolicy::kUnknownSpurious;
  auto inputs_of = [&](std::vector<std::uint32_t> tokens) {
    if (unk) tokens[0] = config.unk();
    return encode_unmasked(config, tokens);
  };

  Stream ft_stream = Stream::derive(master, kFinetune, seed);
  Adam adam(net, {config.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<DenseMatrix> grads;
  SparseBatch batch;
  for (std::size_t iter = 0; iter < config.finetune_iterations; ++iter) {
    batch.clear();
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const Sequence& s = train[ft_stream.index(train.size())];
      batch.add(inputs_of(s.tokens), s.label);
    }
    loss_and_grads(net, batch, grads);
    adam.step(net, grads);
  }

  std::size_t correct = 0;
  for (const auto& s : eval_in) correct += predict(net, inputs_of(s.tokens)) == s.label;
  run.acc_in = static_cast<double>(correct) / static_cast<double>(eval_in.size());

  std::size_t shifted_correct = 0, flips = 0, fp = 0, fp_den = 0;
  for (const auto& s : eval_shift) {
    const std::size_t pred = predict(net, inputs_of(s.tokens));
    shifted_correct += pred == s.label;
    auto swapped = s.tokens;
    swapped[0] = swapped[0] == SeqConfig::spurious(0) ? SeqConfig::spurious(1) : SeqConfig::spurious(0);
    flips += predict(net, inputs_of(swapped)) != pred;
    if (s.label == 0 && s.tokens[0] == SeqConfig::spurious(1)) {
      ++fp_den;
      fp += pred == 1;
    }
  }
  const double n_shift = static_cast<double>(eval_shift.size());
  run.acc_shifted = static_cast<double>(shifted_correct) / n_shift;
  run.reliance = static_cast<double>(flips) / n_shift;
  run.fpr_analog = fp_den > 0 ? static_cast<double>(fp) / static_cast<double>(fp_den) : 0.0;
  return run;
}

}  // namespace

PolicySuiteReport run_policy_suite(const SeqConfig& config, std::size_t seeds, std::uint64_t master_seed,
                                   std::size_t workers, std::span<const MaskPolicy> policies) {
  config.validate();
  if (seeds < 5) throw ConfigError("the policy suite needs at least 5 seeds");
  if (policies.empty()) throw ConfigError("no masking policies selected");

  PolicySuiteReport report;
  report.runs.resize(policies.size() * seeds);
  parallel_for(report.runs.size(), workers, [&](std::size_t c) {
    report.runs[c] = run_one(config, policies[c / seeds], c % seeds, master_seed);
  });

  auto run_of = [&](MaskPolicy p, std::size_t s) -> const PolicyRun* {
    for (std::size_t i = 0; i < policies.size(); ++i)
      if (policies[i] == p) return &report.runs[i * seeds + s];
    return nullptr;
  };

  for (std::size_t i = 0; i < policies.size(); ++i) {
    PolicySummary sum{policies[i], {0, 0, 0, 0}, {0, 0, 0, 0}};
    for (int m = 0; m < 4; ++m) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t s = 0; s < seeds; ++s) {
        const PolicyRun& r = report.runs[i * seeds + s];
        const double v[4] = {r.acc_in, r.acc_shifted, r.reliance, r.fpr_analog};
        s1 += v[m];
        s2 += v[m] * v[m];
      }
      const double n = static_cast<double>(seeds);
      sum.mean[m] = s1 / n;
      sum.sd[m] = std::sqrt(std::max(0.0, (s2 - n * sum.mean[m] * sum.mean[m]) / (n - 1.0)));
    }
    report.summaries.push_back(sum);
    if (policies[i] != MaskPolicy::kScratch)
      report.expected_masked.emplace_back(policies[i], expected_masked_tokens(config, policies[i]));
  }

  const std::size_t required = (7 * seeds + 9) / 10;
  if (run_of(MaskPolicy::kUnmaskSpurious, 0) && run_of(MaskPolicy::kUnmaskRandom, 0)) {
    DirectionalCheck c{"reliance(unmask_spurious) > reliance(unmask_random)", 0, seeds, required};
    for (std::size_t s = 0; s < seeds; ++s)
      c.wins += run_of(MaskPolicy::kUnmaskSpurious, s)->reliance > run_of(MaskPolicy::kUnmaskRandom, s)->reliance;
    report.checks.push_back(c);
  }
  if (run_of(MaskPolicy::kUnknownSpurious, 0) && run_of(MaskPolicy::kScratch, 0)) {
    DirectionalCheck c{"acc_shifted(unknown_spurious) >= acc_shifted(scratch)", 0, seeds, required};
    for (std::size_t s = 0; s < seeds; ++s)
      c.wins +=
          run_of(MaskPolicy::kUnknownSpurious, s)->acc_shifted >= run_of(MaskPolicy::kScratch, s)->acc_shifted;
    report.checks.push_back(c);
  }
  return report;
}

std::string PolicySuiteReport::to_csv() const {
  std::ostringstream out;
  out << "policy,seed,acc_in,acc_shifted,reliance,fpr_analog\n";
  char buf[160];
  for (const auto& r : runs) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.6f,%.6f,%.6f,%.6f\n", std::string(to_string(r.policy)).c_str(), r.seed,
                  r.acc_in, r.acc_shifted, r.reliance, r.fpr_analog);
    out << buf;
  }
  return out.str();
}

nlohmann::json PolicySuiteReport::summary() const {
  static const char* kMetrics[4] = {"acc_in", "acc_shifted", "reliance", "fpr_analog"};
  nlohmann::json pol = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json j{{"policy", to_string(s.policy)}};
    for (int m = 0; m < 4; ++m) j[kMetrics[m]] = {{"mean", s.mean[m]}, {"sd", s.sd[m]}};
    pol.push_back(j);
  }
  nlohmann::json checks_json = nlohmann::json::array();
  for (const auto& c : checks)
    checks_json.push_back(
        {{"name", c.name}, {"wins", c.wins}, {"seeds", c.seeds}, {"required", c.required}, {"pass", c.pass()}});
  nlohmann::json masked = nlohmann::json::object();
  for (const auto& [p, v] : expected_masked) masked[std::string(to_string(p))] = v;
  return {{"policies", pol}, {"directional_checks", checks_json}, {"expected_masked_tokens", masked}};
}

}  // namespace spur
