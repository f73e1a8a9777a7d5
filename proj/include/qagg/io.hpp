#pragma once

// File formats: dictionary and response CSVs, the long-format summary CSV,
// per-replication records, and JSON result documents with an embedded
// run manifest.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "qagg/core.hpp"
#include "qagg/simulation.hpp"

namespace qagg {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);

/// Strict parse of a whole field; throws FormatError.
double parse_double(const std::string& field);

/// n rows x M columns, optional header f1,...,fM.
FunctionDictionary read_dictionary_csv(std::istream& in);
FunctionDictionary read_dictionary_file(const std::string& path);

/// One column, optional header y.
ResponseVector read_response_csv(std::istream& in);
ResponseVector read_response_file(const std::string& path);

/// Prior weights: one column of positive numbers summing to one, optional
/// header pi.
SimplexWeights read_prior_file(const std::string& path);

void write_dictionary_csv(std::ostream& out, const FunctionDictionary& dict);
void write_response_csv(std::ostream& out, const ResponseVector& y);

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> parameters;  // as given or defaulted
  std::map<std::string, std::string> resolved;    // derived values
  std::optional<std::uint64_t> seed;
  std::string artifact_version;
  std::optional<std::string> started;
  std::optional<std::string> finished;

  bool operator==(const RunManifest&) const = default;
};

/// Weight and support indices are 1-based, matching the f1..fM header.
struct ResultDocument {
  std::vector<std::pair<Index, double>> weights;
  std::vector<Index> support;
  double hmse = 0.0;
  std::vector<double> q_trajectory;
  RunManifest manifest;

  bool operator==(const ResultDocument&) const = default;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);
void to_json(nlohmann::json& j, const ResultDocument& d);
void from_json(const nlohmann::json& j, ResultDocument& d);

std::string emit_manifest(const RunManifest& m);
std::string emit_result(const ResultDocument& doc);
ResultDocument parse_result(const std::string& text);

ResultDocument make_result(const FunctionDictionary& dict, const ResponseVector& y,
                           const SimplexWeights& w,
                           std::vector<double> q_trajectory, RunManifest manifest);

/// Current UTC time as an ISO-8601 string.
std::string utc_timestamp();

inline constexpr const char* kSummaryHeader =
    "method,nu,k,regret_mean,regret_std,reps,seed";

struct SummaryTable {
  std::vector<ReplicationSummary> rows;
  std::uint64_t seed = 0;

  bool operator==(const SummaryTable&) const = default;
};

void write_summary_csv(std::ostream& out, const SummaryTable& table);
SummaryTable parse_summary_csv(std::istream& in);

/// replication,seed,best followed by one regret column per series.
void write_records_csv(std::ostream& out, const std::vector<SeriesKey>& keys,
                       const std::vector<ReplicationRecord>& records);

/// Methods as rows, k as columns, cells "mean +- std".
std::string format_wide(const std::vector<ReplicationSummary>& rows);

}  // namespace qagg
