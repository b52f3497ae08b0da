#include "ibs/dataset_io.hpp"

namespace ibs {

namespace {

std::string_view expect_key(const std::string& line, std::string_view key) {
  const std::string prefix = "#" + std::string(key) + "=";
  if (line.rfind(prefix, 0) != 0) throw DataError("dataset header: expected '" + prefix + "...', got '" + line + "'");
  return std::string_view(line).substr(prefix.size());
}

std::string next_line(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("dataset header: unexpected end of file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

DatasetHeader read_dataset_header(std::istream& in) {
  if (next_line(in) != kDatasetMagic) throw DataError("not a dataset file (missing '#ibs-dataset 1')");
  DatasetHeader h;
  h.model = std::string(expect_key(next_line(in), "model"));
  h.theta = parse_number_list(expect_key(next_line(in), "theta"));
  h.seed = parse_integer<std::uint64_t>(expect_key(next_line(in), "seed"));
  h.trials = parse_integer<std::size_t>(expect_key(next_line(in), "trials"));
  h.fields = next_line(in);
  return h;
}

void write_dataset_header(std::ostream& out, const DatasetHeader& h) {
  out << kDatasetMagic << '\n'
      << "#model=" << h.model << '\n'
      << "#theta=" << join_numbers(h.theta) << '\n'
      << "#seed=" << h.seed << '\n'
      << "#trials=" << h.trials << '\n'
      << h.fields << '\n';
}

}  // namespace ibs
