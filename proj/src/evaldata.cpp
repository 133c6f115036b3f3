#include "qt/evaldata.hpp"

#include <fstream>
#include <sstream>

#include "qt/errors.hpp"

namespace qt {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

SplitTag parse_split_tag(const std::string& s, std::int64_t line_no) {
  if (s == "train") return SplitTag::kTrain;
  if (s == "dev") return SplitTag::kDev;
  if (s == "test") return SplitTag::kTest;
  throw ParseError("data line " + std::to_string(line_no) + ": unknown split tag '" + s + "'");
}

int parse_label(const std::string& s, std::int64_t line_no) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size() || v < 0) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ParseError("data line " + std::to_string(line_no) + ": bad label '" + s + "'");
  }
}

template <typename OnFields>
void for_each_line(const std::string& path, OnFields fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open data file: " + path);
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(split_tabs(line), line_no);
  }
  if (line_no == 0) throw InputError("data file is empty: " + path);
}

void attach_split(std::optional<std::vector<SplitTag>>& split, const std::string& field,
                  std::size_t row, std::int64_t line_no) {
  if (!split) {
    if (row != 0)
      throw ParseError("data line " + std::to_string(line_no) +
                       ": split tag appears only on some lines");
    split.emplace();
  }
  split->push_back(parse_split_tag(field, line_no));
}

}  // namespace

ClassifyRows load_classify_tsv(const std::string& path) {
  ClassifyRows rows;
  for_each_line(path, [&](const std::vector<std::string>& fields, std::int64_t line_no) {
    if (fields.size() < 2 || fields.size() > 3)
      throw ParseError("data line " + std::to_string(line_no) +
                       ": expected label<TAB>sentence[<TAB>split]");
    if (fields[1].empty())
      throw ParseError("data line " + std::to_string(line_no) + ": empty sentence");
    const std::size_t row = rows.labels.size();
    rows.labels.push_back(parse_label(fields[0], line_no));
    if (fields.size() == 3) attach_split(rows.split, fields[2], row, line_no);
    else if (rows.split)
      throw ParseError("data line " + std::to_string(line_no) + ": missing split tag");
  });
  return rows;
}

PairRows load_pair_tsv(const std::string& path) {
  PairRows rows;
  for_each_line(path, [&](const std::vector<std::string>& fields, std::int64_t line_no) {
    if (fields.size() < 3 || fields.size() > 4)
      throw ParseError("data line " + std::to_string(line_no) +
                       ": expected label<TAB>sentence1<TAB>sentence2[<TAB>split]");
    if (fields[1].empty() || fields[2].empty())
      throw ParseError("data line " + std::to_string(line_no) + ": empty sentence");
    const int label = parse_label(fields[0], line_no);
    if (label > 1)
      throw ParseError("data line " + std::to_string(line_no) + ": pair labels must be 0/1");
    const std::size_t row = rows.labels.size();
    rows.labels.push_back(label);
    if (fields.size() == 4) attach_split(rows.split, fields[3], row, line_no);
    else if (rows.split)
      throw ParseError("data line " + std::to_string(line_no) + ": missing split tag");
  });
  return rows;
}

SimilarityRows load_similarity_tsv(const std::string& path) {
  SimilarityRows rows;
  for_each_line(path, [&](const std::vector<std::string>& fields, std::int64_t line_no) {
    if (fields.size() != 3)
      throw ParseError("data line " + std::to_string(line_no) +
                       ": expected score<TAB>sentence1<TAB>sentence2");
    try {
      std::size_t pos = 0;
      rows.scores.push_back(std::stod(fields[0], &pos));
      if (pos != fields[0].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw ParseError("data line " + std::to_string(line_no) + ": bad score '" + fields[0] + "'");
    }
  });
  return rows;
}

Mat<double> load_logprob_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open prediction file: " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v;
    while (ss >> v) row.push_back(v);
    if (!ss.eof())
      throw ParseError("prediction file line " + std::to_string(line_no) + ": non-numeric value");
    if (row.empty())
      throw ParseError("prediction file line " + std::to_string(line_no) + ": no values");
    if (!rows.empty() && rows.front().size() != row.size())
      throw FormatError("prediction file line " + std::to_string(line_no) +
                        ": class count differs from earlier lines");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError("prediction file is empty: " + path);
  Mat<double> out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), out.row(static_cast<int>(i)));
  return out;
}

}  // namespace qt
