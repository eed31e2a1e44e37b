#include "ovlm/models.hpp"

#include <sstream>

namespace ovlm {

namespace {

constexpr const char* kConfigPrefix = "config.";

std::string config_hash(const TrainConfig& config) {
  std::ostringstream os;
  write_key_values(os, config.to_map());
  return fnv1a_hex(os.str());
}

}  // namespace

std::string vocab_hash(const Lexicon& lexicon) {
  std::ostringstream os;
  lexicon.write_vocab(os);
  return fnv1a_hex(os.str());
}

ModelBundle ModelBundle::create(const TrainConfig& config, Lexicon lexicon,
                                SpellAlphabet alphabet, Rng& init_rng) {
  ModelBundle b;
  b.config = config;
  b.config.speller.variant = speller_variant_of(config.model);
  b.config.speller.cond_dim = config.lm.embed_dim;
  b.lexicon = std::move(lexicon);
  b.alphabet = std::move(alphabet);
  b.lm = std::make_unique<LexemeLM>(b.config.lm, b.lexicon.size(), init_rng, "lm");
  if (is_hybrid(config.model)) {
    b.speller = std::make_unique<Speller>(b.config.speller, b.alphabet, init_rng, "speller");
    if (ablation_of(config.model) == Ablation::kSepReg) {
      b.unk_speller =
          std::make_unique<Speller>(b.config.speller, b.alphabet, init_rng, "unk_speller");
    }
  }
  return b;
}

std::vector<Parameter> ModelBundle::parameters() const {
  std::vector<Parameter> out;
  auto append = [&](std::span<const Parameter> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  if (lm) append(static_cast<const LexemeLM&>(*lm).parameters());
  if (speller) append(static_cast<const Speller&>(*speller).parameters());
  if (unk_speller) append(static_cast<const Speller&>(*unk_speller).parameters());
  return out;
}

Checkpoint ModelBundle::to_checkpoint() const {
  Checkpoint ckpt;
  for (const auto& [k, v] : config.to_map()) ckpt.metadata[kConfigPrefix + k] = v;
  ckpt.metadata["hash.config"] = config_hash(config);
  ckpt.metadata["vocab.hash"] = vocab_hash(lexicon);
  ckpt.metadata["vocab.size"] = std::to_string(lexicon.size());
  ckpt.metadata["alphabet"] = alphabet.serialize();
  if (merges) {
    std::ostringstream os;
    merges->write(os);
    ckpt.metadata["merges.hash"] = fnv1a_hex(os.str());
  }
  lm->save(ckpt);
  if (speller) speller->save(ckpt);
  if (unk_speller) unk_speller->save(ckpt);
  return ckpt;
}

ModelBundle ModelBundle::from_checkpoint(const Checkpoint& ckpt, Lexicon lexicon,
                                         std::optional<MergeTable> merges) {
  std::map<std::string, std::string> kv;
  const std::string prefix = kConfigPrefix;
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.rfind(prefix, 0) == 0) kv[k.substr(prefix.size())] = v;
  }
  const TrainConfig config = TrainConfig::from_map(kv);
  if (config_hash(config) != ckpt.meta("hash.config")) {
    throw CheckpointError("stored configuration does not match its hash");
  }
  if (vocab_hash(lexicon) != ckpt.meta("vocab.hash")) {
    throw CheckpointError("vocabulary does not match the one the checkpoint was trained with");
  }
  if (merges) {
    std::ostringstream os;
    merges->write(os);
    auto it = ckpt.metadata.find("merges.hash");
    if (it == ckpt.metadata.end() || it->second != fnv1a_hex(os.str())) {
      throw CheckpointError("merge table does not match the checkpoint");
    }
  }
  Rng unused(0);
  ModelBundle b = create(config, std::move(lexicon),
                         SpellAlphabet::deserialize(ckpt.meta("alphabet")), unused);
  b.merges = std::move(merges);
  b.lm->load(ckpt);
  if (b.speller) b.speller->load(ckpt);
  if (b.unk_speller) b.unk_speller->load(ckpt);
  return b;
}

}  // namespace ovlm
