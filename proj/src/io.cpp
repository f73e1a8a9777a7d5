#include "qagg/io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace qagg {

using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& field) {
  std::size_t begin = 0;
  std::size_t end = field.size();
  while (begin < end && (field[begin] == ' ' || field[begin] == '\t')) ++begin;
  while (end > begin && (field[end - 1] == ' ' || field[end - 1] == '\t')) --end;
  const char* first = field.data() + begin;
  const char* last = field.data() + end;
  if (first != last && *first == '+') ++first;
  double value = 0.0;
  const auto res = std::from_chars(first, last, value);
  if (first == last || res.ec != std::errc() || res.ptr != last) {
    throw FormatError("not a number: '" + field + "'");
  }
  if (!std::isfinite(value)) throw FormatError("non-finite value: '" + field + "'");
  return value;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(current);
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::vector<std::string>> read_rows(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    rows.push_back(split_fields(line));
  }
  return rows;
}

bool looks_numeric(const std::string& field) {
  try {
    parse_double(field);
    return true;
  } catch (const FormatError&) {
    return false;
  }
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return in;
}

Vector read_single_column(std::istream& in, const std::string& header,
                          const char* what) {
  auto rows = read_rows(in);
  std::size_t first = 0;
  if (!rows.empty() && rows[0].size() == 1 && !looks_numeric(rows[0][0])) {
    if (trim(rows[0][0]) != header) {
      throw FormatError(std::string(what) + ": expected header '" + header +
                        "', got '" + rows[0][0] + "'");
    }
    first = 1;
  }
  if (rows.size() == first) throw FormatError(std::string(what) + ": no data rows");
  Vector v(static_cast<Index>(rows.size() - first));
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != 1) {
      throw FormatError(std::string(what) + ": row " + std::to_string(r + 1) +
                        " has " + std::to_string(rows[r].size()) +
                        " fields, expected 1");
    }
    v[static_cast<Index>(r - first)] = parse_double(rows[r][0]);
  }
  return v;
}

}  // namespace

FunctionDictionary read_dictionary_csv(std::istream& in) {
  auto rows = read_rows(in);
  if (rows.empty()) throw FormatError("dictionary: empty input");
  const std::size_t m = rows[0].size();
  std::size_t first = 0;
  if (!std::all_of(rows[0].begin(), rows[0].end(), looks_numeric)) {
    for (std::size_t j = 0; j < m; ++j) {
      if (trim(rows[0][j]) != "f" + std::to_string(j + 1)) {
        throw FormatError("dictionary: header field " + std::to_string(j + 1) +
                          " is '" + rows[0][j] + "', expected 'f" +
                          std::to_string(j + 1) + "'");
      }
    }
    first = 1;
  }
  if (rows.size() == first) throw FormatError("dictionary: no data rows");
  Matrix x(static_cast<Index>(rows.size() - first), static_cast<Index>(m));
  for (std::size_t r = first; r < rows.size(); ++r) {
    if (rows[r].size() != m) {
      throw FormatError("dictionary: row " + std::to_string(r + 1) + " has " +
                        std::to_string(rows[r].size()) + " fields, expected " +
                        std::to_string(m));
    }
    for (std::size_t j = 0; j < m; ++j) {
      x(static_cast<Index>(r - first), static_cast<Index>(j)) =
          parse_double(rows[r][j]);
    }
  }
  return FunctionDictionary(std::move(x));
}

FunctionDictionary read_dictionary_file(const std::string& path) {
  auto in = open_input(path);
  return read_dictionary_csv(in);
}

ResponseVector read_response_csv(std::istream& in) {
  return ResponseVector(read_single_column(in, "y", "response"));
}

ResponseVector read_response_file(const std::string& path) {
  auto in = open_input(path);
  return read_response_csv(in);
}

SimplexWeights read_prior_file(const std::string& path) {
  auto in = open_input(path);
  Vector pi = read_single_column(in, "pi", "prior");
  try {
    return SimplexWeights(std::move(pi));
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("prior: ") + e.what());
  }
}

void write_dictionary_csv(std::ostream& out, const FunctionDictionary& dict) {
  const Matrix& x = dict.values();
  for (Index j = 0; j < x.cols(); ++j) out << (j ? "," : "") << 'f' << j + 1;
  out << '\n';
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      out << (j ? "," : "") << format_double(x(i, j));
    }
    out << '\n';
  }
}

void write_response_csv(std::ostream& out, const ResponseVector& y) {
  out << "y\n";
  for (Index i = 0; i < y.size(); ++i) out << format_double(y[i]) << '\n';
}

void to_json(json& j, const RunManifest& m) {
  j = json{{"command", m.command},
           {"parameters", m.parameters},
           {"resolved", m.resolved},
           {"artifact_version", m.artifact_version}};
  j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  j["started"] = m.started ? json(*m.started) : json(nullptr);
  j["finished"] = m.finished ? json(*m.finished) : json(nullptr);
}

void from_json(const json& j, RunManifest& m) {
  j.at("command").get_to(m.command);
  j.at("parameters").get_to(m.parameters);
  m.resolved = j.value("resolved", std::map<std::string, std::string>{});
  j.at("artifact_version").get_to(m.artifact_version);
  const auto opt_string = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
  };
  m.seed = j.contains("seed") && !j.at("seed").is_null()
               ? std::optional<std::uint64_t>(j.at("seed").get<std::uint64_t>())
               : std::nullopt;
  m.started = opt_string("started");
  m.finished = opt_string("finished");
}

void to_json(json& j, const ResultDocument& d) {
  json weights = json::array();
  for (const auto& [index, value] : d.weights) {
    weights.push_back({{"index", index}, {"value", value}});
  }
  j = json{{"weights", weights},
           {"support", d.support},
           {"hmse", d.hmse},
           {"q_trajectory", d.q_trajectory},
           {"manifest", d.manifest}};
}

void from_json(const json& j, ResultDocument& d) {
  d.weights.clear();
  for (const auto& w : j.at("weights")) {
    d.weights.emplace_back(w.at("index").get<Index>(), w.at("value").get<double>());
  }
  j.at("support").get_to(d.support);
  j.at("hmse").get_to(d.hmse);
  j.at("q_trajectory").get_to(d.q_trajectory);
  j.at("manifest").get_to(d.manifest);
}

std::string emit_manifest(const RunManifest& m) {
  return json(m).dump(2) + "\n";
}

std::string emit_result(const ResultDocument& doc) {
  return json(doc).dump(2) + "\n";
}

ResultDocument parse_result(const std::string& text) {
  try {
    return json::parse(text).get<ResultDocument>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("result document: ") + e.what());
  }
}

ResultDocument make_result(const FunctionDictionary& dict, const ResponseVector& y,
                           const SimplexWeights& w,
                           std::vector<double> q_trajectory, RunManifest manifest) {
  require_compatible(dict, y);
  require_compatible(dict, w);
  ResultDocument doc;
  for (Index j : w.support()) {
    doc.weights.emplace_back(j + 1, w[j]);
    doc.support.push_back(j + 1);
  }
  doc.hmse = mse(y, combine(dict, w));
  doc.q_trajectory = std::move(q_trajectory);
  doc.manifest = std::move(manifest);
  return doc;
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_summary_csv(std::ostream& out, const SummaryTable& table) {
  out << kSummaryHeader << '\n';
  for (const auto& row : table.rows) {
    out << row.method << ',' << (row.nu ? format_double(*row.nu) : "") << ','
        << (row.k ? std::to_string(*row.k) : "") << ','
        << format_double(row.regret_mean) << ',' << format_double(row.regret_std)
        << ',' << row.reps << ',' << table.seed << '\n';
  }
}

SummaryTable parse_summary_csv(std::istream& in) {
  const auto rows = read_rows(in);
  if (rows.empty()) throw FormatError("summary: empty input");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    header += (i ? "," : "") + rows[0][i];
  }
  if (header != kSummaryHeader) {
    throw FormatError("summary: unexpected header '" + header + "'");
  }
  SummaryTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& f = rows[r];
    if (f.size() != 7) {
      throw FormatError("summary: row " + std::to_string(r + 1) +
                        " does not have 7 fields");
    }
    ReplicationSummary row;
    row.method = f[0];
    if (!f[1].empty()) row.nu = parse_double(f[1]);
    try {
      if (!f[2].empty()) row.k = std::stoi(f[2]);
      row.reps = std::stoi(f[5]);
      const std::uint64_t seed = std::stoull(f[6]);
      if (r > 1 && seed != table.seed) {
        throw FormatError("summary: rows disagree on the seed");
      }
      table.seed = seed;
    } catch (const std::logic_error&) {
      throw FormatError("summary: bad integer field in row " + std::to_string(r + 1));
    }
    row.regret_mean = parse_double(f[3]);
    row.regret_std = parse_double(f[4]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

std::string series_label(const SeriesKey& key) {
  if (!key.k) return key.method;
  return key.method + "_nu" + format_double(*key.nu) + "_k" + std::to_string(*key.k);
}

}  // namespace

void write_records_csv(std::ostream& out, const std::vector<SeriesKey>& keys,
                       const std::vector<ReplicationRecord>& records) {
  out << "replication,seed,best";
  for (const auto& key : keys) out << ',' << series_label(key);
  out << '\n';
  for (const auto& rec : records) {
    out << rec.replication << ',' << rec.seed << ',' << rec.best + 1;
    for (double r : rec.regrets) out << ',' << format_double(r);
    out << '\n';
  }
}

std::string format_wide(const std::vector<ReplicationSummary>& rows) {
  const auto cell = [](const ReplicationSummary& r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f +- %.3f", r.regret_mean, r.regret_std);
    return std::string(buf);
  };

  std::set<int> all_k;
  for (const auto& r : rows) {
    if (r.k) all_k.insert(*r.k);
  }
  std::vector<int> columns;
  if (!all_k.empty()) {
    const int k_max = *all_k.rbegin();
    for (int k : {1, 2, 5, 10, 20, 40}) {
      if (all_k.count(k) && k <= k_max) columns.push_back(k);
    }
    if (columns.empty() || columns.back() != k_max) columns.push_back(k_max);
  }

  std::ostringstream out;
  std::vector<std::pair<std::string, std::optional<double>>> groups;
  for (const auto& r : rows) {
    if (!r.k) continue;
    std::pair<std::string, std::optional<double>> g{r.method, r.nu};
    if (std::find(groups.begin(), groups.end(), g) == groups.end()) groups.push_back(g);
  }
  if (!groups.empty()) {
    out << std::left << std::setw(14) << "method";
    for (int k : columns) out << std::setw(18) << ("k=" + std::to_string(k));
    out << '\n';
    for (const auto& [method, nu] : groups) {
      std::string label = method;
      if (nu) label += " nu=" + format_double(*nu);
      out << std::setw(14) << label;
      for (int k : columns) {
        std::string text = "-";
        for (const auto& r : rows) {
          if (r.method == method && r.nu == nu && r.k == k) text = cell(r);
        }
        out << std::setw(18) << text;
      }
      out << '\n';
    }
  }
  for (const auto& r : rows) {
    if (r.k) continue;
    out << std::left << std::setw(14) << r.method << cell(r) << '\n';
  }
  return out.str();
}

}  // namespace qagg
