#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace qt {

constexpr std::int32_t kPadId = 0;
constexpr std::int32_t kUnkId = 1;

// Token <-> id bijection. Ids 0 and 1 are reserved for padding and
// out-of-vocabulary tokens; content ids are assigned by descending corpus
// frequency with lexicographic tie-breaking, so a given corpus and size cap
// always produce the same table.
class Vocabulary {
 public:
  Vocabulary();

  // tokens must be ordered by assigned id (2, 3, ...).
  void add_tokens(const std::vector<std::pair<std::string, std::int64_t>>& ranked);

  std::int32_t encode(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnkId : it->second;
  }

  const std::string& decode(std::int32_t id) const { return id_to_token_.at(id); }
  std::int64_t count(std::int32_t id) const { return id_to_count_.at(id); }
  bool contains(const std::string& token) const { return token_to_id_.count(token) > 0; }

  std::int32_t size() const { return static_cast<std::int32_t>(id_to_token_.size()); }

 private:
  std::unordered_map<std::string, std::int32_t> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::vector<std::int64_t> id_to_count_;
};

// TSV lines `token<TAB>id<TAB>count`, sorted by id.
void save_vocab(const Vocabulary& vocab, std::ostream& out);
void save_vocab_file(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocab(std::istream& in);
Vocabulary load_vocab_file(const std::string& path);

}  // namespace qt
