#include "qt/pretrained.hpp"

#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "qt/errors.hpp"

namespace qt {

PretrainedTable read_pretrained_embeddings(std::istream& in, const Vocabulary& vocab, Rng& rng) {
  std::string line;
  std::int64_t line_no = 0;
  int dim = -1;
  std::unordered_map<std::int32_t, std::vector<float>> found;

  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string token;
    ss >> token;

    if (first_content_line) {
      // A leading `N D` line is a header; skip it when both fields parse as
      // integers and nothing follows.
      std::string second;
      if (ss >> second) {
        char* end1 = nullptr;
        char* end2 = nullptr;
        (void)std::strtoll(token.c_str(), &end1, 10);
        (void)std::strtoll(second.c_str(), &end2, 10);
        std::string rest;
        const bool two_ints = *end1 == '\0' && *end2 == '\0' && !(ss >> rest);
        first_content_line = false;
        if (two_ints) continue;
        ss.clear();
        ss.str(line);
        ss >> token;
      } else {
        throw ParseError("pretrained vectors line " + std::to_string(line_no) +
                         ": expected token and values");
      }
    }

    std::vector<float> values;
    double v;
    while (ss >> v) values.push_back(static_cast<float>(v));
    if (!ss.eof())
      throw ParseError("pretrained vectors line " + std::to_string(line_no) +
                       ": non-numeric value");
    if (values.empty())
      throw ParseError("pretrained vectors line " + std::to_string(line_no) + ": no values");
    if (dim < 0) dim = static_cast<int>(values.size());
    if (static_cast<int>(values.size()) != dim)
      throw FormatError("pretrained vectors line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim) + " values, got " + std::to_string(values.size()));
    if (vocab.contains(token)) {
      const std::int32_t id = vocab.encode(token);
      if (id >= 2) found.emplace(id, std::move(values));
    }
  }
  if (dim < 0) throw InputError("pretrained vectors: file holds no vectors");

  PretrainedTable result;
  result.dim = dim;
  result.table = init<float>(vocab.size(), dim, InitScheme::kUniform, rng, -0.1, 0.1);
  for (int j = 0; j < dim; ++j) result.table.at(kPadId, j) = 0.0f;
  for (const auto& [id, vec] : found)
    for (int j = 0; j < dim; ++j) result.table.at(id, j) = vec[j];

  const std::int64_t content = vocab.size() - 2;
  result.coverage = content > 0 ? static_cast<double>(found.size()) / static_cast<double>(content)
                                : 0.0;
  return result;
}

PretrainedTable load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab,
                                           Rng& rng) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open pretrained vector file: " + path);
  return read_pretrained_embeddings(in, vocab, rng);
}

}  // namespace qt
