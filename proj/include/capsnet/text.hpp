#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "capsnet/tensor.hpp"

namespace capsnet {

constexpr Index kPadId = 0;
constexpr Index kUnkId = 1;

/// Token ids are contiguous: PAD=0, UNK=1, then corpus tokens ordered by
/// descending frequency with lexicographic tie-break.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(const std::vector<std::vector<std::string>>& corpus, int min_freq = 1);
  /// Rebuilds from a full id-ordered token list (PAD and UNK at 0 and 1).
  static Vocabulary from_tokens(const std::vector<std::string>& id_to_token);

  Index id_of(const std::string& token) const;  // UNK for unseen tokens
  const std::string& token_of(Index id) const;
  Index size() const { return static_cast<Index>(id_to_token_.size()); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  const std::vector<std::string>& tokens() const { return id_to_token_; }

 private:
  std::unordered_map<std::string, Index> token_to_id_;
  std::vector<std::string> id_to_token_;
};

struct EncodedUtterance {
  std::vector<Index> ids;  // exactly max_len entries, PAD-suffixed
  Index true_length = 0;
  Index intent_id = -1;
};

/// Lowercases and splits on whitespace; punctuation becomes standalone tokens,
/// except an apostrophe which starts a new token carrying its letter run
/// ("what's" -> "what", "'s").
std::vector<std::string> tokenize(const std::string& text);

EncodedUtterance encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                        Index max_len);

/// Gathers rows of the embedding matrix E [V x d] for one utterance,
/// producing the [max_len x d] input matrix. Row 0 of E (PAD) is pinned to
/// zero by the training loop, so padded positions stay zero.
Tensor embed_sequence(Tape& tape, const EncodedUtterance& enc, const Tensor& E);

/// Loads pretrained vectors ("token v1 ... vd" per line) into rows of E for
/// tokens present in vocab; unseen vocab tokens keep their initialization.
void load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab, Tensor& E);

}  // namespace capsnet
