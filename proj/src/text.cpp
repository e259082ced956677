#include "capsnet/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace capsnet {

Vocabulary::Vocabulary() : id_to_token_{"<pad>", "<unk>"} {
  token_to_id_[id_to_token_[0]] = kPadId;
  token_to_id_[id_to_token_[1]] = kUnkId;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus, int min_freq) {
  if (min_freq < 1) throw ConfigError("build_vocab: min_freq must be >= 1");
  std::map<std::string, Index> freq;  // ordered, for the lexicographic tie-break
  for (const auto& tokens : corpus)
    for (const auto& t : tokens) ++freq[t];
  std::vector<std::pair<std::string, Index>> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (const auto& [tok, n] : kept) {
    v.token_to_id_[tok] = v.size();
    v.id_to_token_.push_back(tok);
  }
  return v;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& id_to_token) {
  if (id_to_token.size() < 2) throw DataError("vocabulary token list lacks PAD/UNK entries");
  Vocabulary v;
  for (std::size_t i = 2; i < id_to_token.size(); ++i) {
    v.token_to_id_[id_to_token[i]] = v.size();
    v.id_to_token_.push_back(id_to_token[i]);
  }
  return v;
}

Index Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_of(Index id) const {
  if (id < 0 || id >= size())
    throw DataError("vocabulary: id " + std::to_string(id) + " out of range");
  return id_to_token_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocabulary to " + path);
  for (Index i = 2; i < size(); ++i) out << id_to_token_[static_cast<std::size_t>(i)] << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read vocabulary from " + path);
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    v.token_to_id_[line] = v.size();
    v.id_to_token_.push_back(line);
  }
  return v;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      tokens.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char uc : text) {
    const char c = static_cast<char>(std::tolower(uc));
    if (std::isspace(uc)) {
      flush();
    } else if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    } else if (c == '\'') {
      flush();
      cur.push_back(c);
    } else {
      flush();
      tokens.emplace_back(1, c);
    }
  }
  flush();
  return tokens;
}

EncodedUtterance encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                        Index max_len) {
  if (max_len < 1) throw ConfigError("encode: max_len must be >= 1");
  EncodedUtterance enc;
  enc.true_length = std::min<Index>(static_cast<Index>(tokens.size()), max_len);
  enc.ids.assign(static_cast<std::size_t>(max_len), kPadId);
  for (Index t = 0; t < enc.true_length; ++t)
    enc.ids[static_cast<std::size_t>(t)] = vocab.id_of(tokens[static_cast<std::size_t>(t)]);
  return enc;
}

Tensor embed_sequence(Tape& tape, const EncodedUtterance& enc, const Tensor& E) {
  return gather_rows(tape, E, enc.ids);
}

void load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab, Tensor& E) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read embeddings from " + path);
  const Index d = E.dim(1);
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;
    const Index id = vocab.id_of(token);
    std::vector<double> row(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i)
      if (!(ss >> row[static_cast<std::size_t>(i)]))
        throw DataError("embeddings " + path + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(d) + " floats after token");
    if (id == kUnkId && token != vocab.token_of(kUnkId)) continue;
    std::copy(row.begin(), row.end(), E.data() + id * d);
  }
  std::fill_n(E.data(), d, 0.0);  // PAD row stays zero
}

}  // namespace capsnet
