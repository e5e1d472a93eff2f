#include <algorithm>
#include <charconv>
#include <string>
#include <string_view>
#include <tuple>

#include <json.hpp>

#include "tsg/graph_data.hpp"
#include "tsg/io.hpp"

namespace tsg {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  // A single trailing blank line is the normal end-of-file newline.
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_number(std::string_view field, const std::string& file, long line) {
  field = trim(field);
  T value{};
  const auto* first = field.data();
  if (!field.empty() && field.front() == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
    throw DataError(file, line, "cannot parse '" + std::string(field) + "' as a number");
  }
  return value;
}

std::string read_required(const fs::path& dir, const char* name) {
  const auto path = dir / name;
  if (!fs::exists(path)) throw DataError(path.string(), 0, "missing bundle file");
  return read_file(path);
}

json parse_json(const fs::path& path, const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(path.string(), 0, std::string("invalid JSON: ") + e.what());
  }
}

std::vector<Index> read_id_list(const json& splits, const char* key, const std::string& file, Index n) {
  if (!splits.contains(key) || !splits[key].is_array()) {
    throw DataError(file, 0, std::string("missing array '") + key + "'");
  }
  std::vector<Index> ids;
  for (const auto& item : splits[key]) {
    if (!item.is_number_integer()) throw DataError(file, 0, std::string("non-integer id in '") + key + "'");
    const auto v = item.get<Index>();
    if (v < 0 || v >= n) {
      throw DataError(file, 0, std::string("'") + key + "' node " + std::to_string(v) + " out of range");
    }
    if (!ids.empty() && ids.back() >= v) {
      throw DataError(file, 0, std::string("'") + key + "' ids must be strictly ascending (at " + std::to_string(v) + ")");
    }
    ids.push_back(v);
  }
  return ids;
}

}  // namespace

GraphBundle load_bundle(const fs::path& dir) {
  GraphBundle b;

  const auto meta_path = (dir / "meta.json").string();
  const auto meta = parse_json(meta_path, read_required(dir, "meta.json"));
  Index num_features = 0;
  try {
    b.num_nodes = meta.at("num_nodes").get<Index>();
    num_features = meta.at("num_features").get<Index>();
    b.num_classes = meta.at("num_classes").get<int>();
  } catch (const json::exception& e) {
    throw DataError(meta_path, 0, std::string("bad meta field: ") + e.what());
  }
  if (b.num_nodes < 0 || num_features < 0 || b.num_classes < 1) {
    throw DataError(meta_path, 0, "counts must be non-negative and num_classes >= 1");
  }

  {
    const auto file = (dir / "edges.csv").string();
    const auto text = read_required(dir, "edges.csv");
    const auto lines = split_lines(text);
    if (lines.empty() || trim(lines[0]) != "src,dst") throw DataError(file, 1, "expected header 'src,dst'");
    std::vector<std::tuple<Index, Index, long>> raw;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const long line_no = static_cast<long>(i) + 1;
      const auto fields = split_fields(lines[i]);
      if (fields.size() != 2) throw DataError(file, line_no, "expected 2 fields");
      const auto u = parse_number<Index>(fields[0], file, line_no);
      const auto v = parse_number<Index>(fields[1], file, line_no);
      if (u == v) throw DataError(file, line_no, "self-loop on node " + std::to_string(u));
      if (u > v) throw DataError(file, line_no, "src must be < dst");
      if (u < 0 || v >= b.num_nodes) throw DataError(file, line_no, "endpoint out of range");
      raw.emplace_back(u, v, line_no);
    }
    std::sort(raw.begin(), raw.end());
    for (std::size_t k = 0; k < raw.size(); ++k) {
      const auto& [u, v, line_no] = raw[k];
      if (k > 0 && std::get<0>(raw[k - 1]) == u && std::get<1>(raw[k - 1]) == v) {
        throw DataError(file, std::max(line_no, std::get<2>(raw[k - 1])),
                        "duplicate edge (" + std::to_string(u) + ", " + std::to_string(v) + ")");
      }
      b.edges.emplace_back(u, v);
    }
  }

  {
    const auto file = (dir / "features.csv").string();
    const auto text = read_required(dir, "features.csv");
    const auto lines = split_lines(text);
    if (static_cast<Index>(lines.size()) != b.num_nodes) {
      throw DataError(file, 0, "expected " + std::to_string(b.num_nodes) + " lines, found " + std::to_string(lines.size()));
    }
    b.features.resize(b.num_nodes, num_features);
    for (Index v = 0; v < b.num_nodes; ++v) {
      const long line_no = static_cast<long>(v) + 1;
      const auto fields = num_features == 0 && lines[static_cast<std::size_t>(v)].empty()
                              ? std::vector<std::string_view>{}
                              : split_fields(lines[static_cast<std::size_t>(v)]);
      if (static_cast<Index>(fields.size()) != num_features) {
        throw DataError(file, line_no, "expected " + std::to_string(num_features) + " values");
      }
      for (Index j = 0; j < num_features; ++j) {
        b.features(v, j) = parse_number<double>(fields[static_cast<std::size_t>(j)], file, line_no);
      }
    }
  }

  {
    const auto file = (dir / "labels.csv").string();
    const auto text = read_required(dir, "labels.csv");
    const auto lines = split_lines(text);
    if (static_cast<Index>(lines.size()) != b.num_nodes) {
      throw DataError(file, 0, "expected " + std::to_string(b.num_nodes) + " lines, found " + std::to_string(lines.size()));
    }
    for (std::size_t v = 0; v < lines.size(); ++v) {
      const long line_no = static_cast<long>(v) + 1;
      const int y = parse_number<int>(lines[v], file, line_no);
      if (y != kUnknownLabel && (y < 0 || y >= b.num_classes)) {
        throw DataError(file, line_no, "label " + std::to_string(y) + " outside [0, " + std::to_string(b.num_classes) + ")");
      }
      b.labels.push_back(y);
    }
  }

  {
    const auto file = (dir / "splits.json").string();
    const auto splits = parse_json(file, read_required(dir, "splits.json"));
    b.split.train = read_id_list(splits, "train", file, b.num_nodes);
    b.split.val = read_id_list(splits, "val", file, b.num_nodes);
    b.split.test = read_id_list(splits, "test", file, b.num_nodes);
    try {
      b.validate();
    } catch (const InvalidArgument& e) {
      throw DataError(file, 0, e.what());
    }
  }
  return b;
}

void save_bundle(const GraphBundle& b, const fs::path& dir) {
  b.validate();
  fs::create_directories(dir);

  json meta = {{"num_nodes", b.num_nodes}, {"num_features", b.num_features()}, {"num_classes", b.num_classes}};
  write_file_atomic(dir / "meta.json", meta.dump() + "\n");

  std::string edges = "src,dst\n";
  for (const auto& [u, v] : b.edges) edges += std::to_string(u) + "," + std::to_string(v) + "\n";
  write_file_atomic(dir / "edges.csv", edges);

  std::string features;
  for (Index v = 0; v < b.num_nodes; ++v) {
    for (Index j = 0; j < b.num_features(); ++j) {
      if (j) features += ',';
      features += format_double(b.features(v, j));
    }
    features += '\n';
  }
  write_file_atomic(dir / "features.csv", features);

  std::string labels;
  for (int y : b.labels) labels += std::to_string(y) + "\n";
  write_file_atomic(dir / "labels.csv", labels);

  json splits = {{"train", b.split.train}, {"val", b.split.val}, {"test", b.split.test}};
  write_file_atomic(dir / "splits.json", splits.dump() + "\n");
}

}  // namespace tsg
