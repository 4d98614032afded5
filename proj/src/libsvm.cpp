#include "isarah/libsvm.hpp"

#include "isarah/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <string>
#include <string_view>

namespace isarah {

namespace {

double parse_double(std::string_view token, std::size_t line, const char* what) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last)
    throw ParseError(line, std::string("bad ") + what + " '" + std::string(token) + "'");
  if (!std::isfinite(value)) throw ParseError(line, std::string("non-finite ") + what);
  return value;
}

std::int64_t parse_index(std::string_view token, std::size_t line) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
    throw ParseError(line, "bad feature index '" + std::string(token) + "'");
  if (value < 1) throw ParseError(line, "feature indices are 1-based, got " + std::to_string(value));
  if (value > std::numeric_limits<std::int32_t>::max()) throw ParseError(line, "feature index too large");
  return value;
}

}  // namespace

LabeledDataset parse_libsvm(std::istream& in) {
  LabeledDataset data;
  std::vector<double> raw_labels;
  std::string text;
  std::size_t line = 0;

  while (std::getline(in, text)) {
    ++line;
    std::string_view view(text);
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);

    std::size_t pos = 0;
    auto next_token = [&]() -> std::string_view {
      while (pos < view.size() && std::isspace(static_cast<unsigned char>(view[pos]))) ++pos;
      const std::size_t start = pos;
      while (pos < view.size() && !std::isspace(static_cast<unsigned char>(view[pos]))) ++pos;
      return view.substr(start, pos - start);
    };

    const std::string_view label = next_token();
    if (label.empty()) continue;
    raw_labels.push_back(parse_double(label, line, "label"));

    std::int64_t previous = 0;
    for (std::string_view token = next_token(); !token.empty(); token = next_token()) {
      const auto colon = token.find(':');
      if (colon == std::string_view::npos) throw ParseError(line, "expected idx:val, got '" + std::string(token) + "'");
      const std::int64_t index = parse_index(token.substr(0, colon), line);
      if (index <= previous) throw ParseError(line, "feature indices must be strictly increasing");
      previous = index;
      const double value = parse_double(token.substr(colon + 1), line, "feature value");
      data.columns.push_back(static_cast<std::int32_t>(index - 1));
      data.values.push_back(value);
      data.dimension = std::max<Eigen::Index>(data.dimension, index);
    }
    data.row_offsets.push_back(static_cast<std::int64_t>(data.columns.size()));
  }

  if (raw_labels.empty()) throw DataError("libsvm: no data rows");

  const std::set<double> distinct(raw_labels.begin(), raw_labels.end());
  const bool signed_labels = std::all_of(distinct.begin(), distinct.end(), [](double y) { return y == 1.0 || y == -1.0; });
  if (!signed_labels && distinct.size() != 2)
    throw DataError("libsvm: labels must be binary, found " + std::to_string(distinct.size()) + " distinct values");
  const double low = *distinct.begin();
  data.labels.reserve(raw_labels.size());
  for (double y : raw_labels) data.labels.push_back(signed_labels ? y : (y == low ? -1.0 : 1.0));
  return data;
}

LabeledDataset read_libsvm(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_libsvm(in);
}

LogisticProblem load_libsvm(const std::filesystem::path& path, double lambda) {
  return LogisticProblem(read_libsvm(path), lambda);
}

}  // namespace isarah
