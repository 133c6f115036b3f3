#include "qt/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "qt/errors.hpp"

namespace qt {

Vocabulary::Vocabulary() {
  id_to_token_ = {"<pad>", "<unk>"};
  id_to_count_ = {0, 0};
  token_to_id_ = {{"<pad>", kPadId}, {"<unk>", kUnkId}};
}

void Vocabulary::add_tokens(const std::vector<std::pair<std::string, std::int64_t>>& ranked) {
  for (const auto& [token, count] : ranked) {
    if (token_to_id_.count(token))
      throw InputError("Vocabulary: duplicate token '" + token + "'");
    token_to_id_.emplace(token, static_cast<std::int32_t>(id_to_token_.size()));
    id_to_token_.push_back(token);
    id_to_count_.push_back(count);
  }
}

void save_vocab(const Vocabulary& vocab, std::ostream& out) {
  for (std::int32_t id = 0; id < vocab.size(); ++id)
    out << vocab.decode(id) << '\t' << id << '\t' << vocab.count(id) << '\n';
}

void save_vocab_file(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot open vocabulary file for writing: " + path);
  save_vocab(vocab, out);
}

Vocabulary load_vocab(std::istream& in) {
  Vocabulary vocab;
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  std::string line;
  std::int64_t line_no = 0;
  std::int32_t expected_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos)
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": expected 3 fields");
    const std::string token = line.substr(0, tab1);
    std::int32_t id;
    std::int64_t count;
    try {
      id = std::stoi(line.substr(tab1 + 1, tab2 - tab1 - 1));
      count = std::stoll(line.substr(tab2 + 1));
    } catch (const std::exception&) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": bad id or count");
    }
    if (id != expected_id)
      throw ParseError("vocabulary line " + std::to_string(line_no) + ": ids must be dense and sorted");
    if (id >= 2) ranked.emplace_back(token, count);
    ++expected_id;
  }
  if (expected_id < 2) throw ParseError("vocabulary file lacks the reserved pad/unk rows");
  vocab.add_tokens(ranked);
  return vocab;
}

Vocabulary load_vocab_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open vocabulary file: " + path);
  return load_vocab(in);
}

}  // namespace qt
