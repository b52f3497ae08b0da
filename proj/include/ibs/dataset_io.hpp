#pragma once

#include <istream>
#include <ostream>
#include <string>

#include "ibs/models/model.hpp"
#include "ibs/text_format.hpp"

namespace ibs {

// Dataset files are line oriented:
//
//   #ibs-dataset 1
//   #model=orientation
//   #theta=0.693,0.1,0.1
//   #seed=42
//   #trials=600
//   stimulus_deg,response
//   -1.25,0
//   ...
//
// Numbers use the shortest decimal form that parses back to the same double,
// so writing and re-reading is bit-exact.

inline constexpr std::string_view kDatasetMagic = "#ibs-dataset 1";

struct DatasetHeader {
  std::string model;
  std::vector<double> theta;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::string fields;
};

/// Reads the header and leaves the stream at the first trial record.
DatasetHeader read_dataset_header(std::istream& in);

void write_dataset_header(std::ostream& out, const DatasetHeader& header);

template <SimulatorModel M>
void write_dataset(std::ostream& out, const DatasetFor<M>& data) {
  write_dataset_header(out, {data.model.empty() ? std::string(M::kName) : data.model, data.theta, data.seed,
                             data.size(), std::string(M::fields())});
  std::string line;
  for (const auto& t : data.trials) {
    line.clear();
    M::format_trial(line, t);
    line.push_back('\n');
    out << line;
  }
  if (!out) throw DataError("failed writing dataset");
}

template <SimulatorModel M>
DatasetFor<M> read_dataset(std::istream& in) {
  const auto header = read_dataset_header(in);
  if (header.model != M::kName) {
    throw DataError("dataset is for model '" + header.model + "', expected '" + std::string(M::kName) + "'");
  }
  if (header.fields != M::fields()) throw DataError("unexpected field list '" + header.fields + "'");
  DatasetFor<M> data;
  data.model = header.model;
  data.theta = header.theta;
  data.seed = header.seed;
  data.trials.reserve(header.trials);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    data.trials.push_back(M::parse_trial(line));
  }
  if (data.trials.size() != header.trials) {
    throw DataError("header declares " + std::to_string(header.trials) + " trials but file holds " +
                    std::to_string(data.trials.size()));
  }
  if (data.trials.empty()) throw DataError("dataset holds no trials");
  return data;
}

}  // namespace ibs
