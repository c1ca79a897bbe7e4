#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hokme/error.hpp"
#include "hokme/format.hpp"
#include "hokme/path.hpp"

namespace hokme {

namespace detail {

/// Resamples every path onto the first path's grid when grids differ.
inline Ensemble homogenize(std::vector<Path> paths) {
  require(!paths.empty(), "dataset contains no paths");
  for (std::size_t i = 0; i < paths.size(); ++i)
    require(paths[i].length() >= 2, "dataset path " + std::to_string(i) + " has fewer than two points");
  const std::vector<double> grid = paths.front().times();
  for (Path& p : paths)
    if (p.times() != grid) p = resample(p, grid);
  return Ensemble(std::move(paths));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    field.erase(0, field.find_first_not_of(" \t\r"));
    field.erase(field.find_last_not_of(" \t\r") + 1);
    fields.push_back(field);
  }
  return fields;
}

inline double parse_number(const std::string& text, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ValidationError(where + ": not a number: '" + text + "'");
  }
  require(used == text.size(), where + ": trailing characters in '" + text + "'");
  return v;
}

}  // namespace detail

/// Parses one JSON object {"times": [...], "values": [[...], ...]}.
inline Path path_from_json(const nlohmann::json& obj) {
  require(obj.is_object() && obj.contains("times") && obj.contains("values"),
          "path record needs 'times' and 'values'");
  const auto& jt = obj.at("times");
  const auto& jv = obj.at("values");
  require(jt.is_array() && jv.is_array(), "'times' and 'values' must be arrays");
  require(jt.size() == jv.size(), "'times' and 'values' lengths differ");
  require(!jv.empty(), "path record has no points");
  std::vector<double> times;
  times.reserve(jt.size());
  for (const auto& t : jt) {
    require(t.is_number(), "'times' entries must be numbers");
    times.push_back(t.get<double>());
  }
  const auto d = jv.front().is_array() ? jv.front().size() : 0;
  require(d >= 1, "'values' rows must be non-empty arrays");
  Eigen::MatrixXd values(static_cast<Eigen::Index>(jv.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < jv.size(); ++r) {
    require(jv[r].is_array() && jv[r].size() == d, "'values' rows must all have length " +
                                                       std::to_string(d));
    for (std::size_t c = 0; c < d; ++c) {
      require(jv[r][c].is_number(), "'values' entries must be numbers");
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = jv[r][c].get<double>();
    }
  }
  return Path(std::move(times), std::move(values));
}

inline ordered_json path_to_json(const Path& p) {
  ordered_json obj;
  obj["times"] = p.times();
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < p.length(); ++r) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index c = 0; c < p.dim(); ++c) row.push_back(p.values()(r, c));
    rows.push_back(std::move(row));
  }
  obj["values"] = std::move(rows);
  return obj;
}

/// JSON-lines dataset: one path object per non-blank line.
inline Ensemble parse_jsonl(std::istream& in) {
  std::vector<Path> paths;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      paths.push_back(path_from_json(obj));
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return detail::homogenize(std::move(paths));
}

inline void write_jsonl(std::ostream& out, const Ensemble& e) {
  for (const Path& p : e) out << dump_json(path_to_json(p), -1) << '\n';
}

/// One path in CSV form with header `time,x1,...,xd`.
inline Path parse_path_csv(std::istream& in, const std::string& name = "csv") {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), name + ": empty file");
  const auto header = detail::split_csv_line(line);
  require(header.size() >= 2 && header.front() == "time",
          name + ": header must be time,x1,...,xd");
  for (std::size_t c = 1; c < header.size(); ++c)
    require(header[c] == "x" + std::to_string(c), name + ": unexpected column '" + header[c] + "'");
  const std::size_t d = header.size() - 1;
  std::vector<double> times;
  std::vector<double> flat;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv_line(line);
    const std::string where = name + ":" + std::to_string(lineno);
    require(fields.size() == d + 1, where + ": expected " + std::to_string(d + 1) + " fields");
    times.push_back(detail::parse_number(fields[0], where));
    for (std::size_t c = 1; c <= d; ++c) flat.push_back(detail::parse_number(fields[c], where));
  }
  require(!times.empty(), name + ": no data rows");
  Eigen::MatrixXd values(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < times.size(); ++r)
    for (std::size_t c = 0; c < d; ++c)
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = flat[r * d + c];
  return Path(std::move(times), std::move(values));
}

inline void write_path_csv(std::ostream& out, const Path& p) {
  out << "time";
  for (Eigen::Index c = 0; c < p.dim(); ++c) out << ",x" << (c + 1);
  out << '\n';
  for (Eigen::Index r = 0; r < p.length(); ++r) {
    out << format_double(p.times()[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < p.dim(); ++c) out << ',' << format_double(p.values()(r, c));
    out << '\n';
  }
}

/// Directory of `*.csv` files, one path each, taken in lexicographic filename order.
inline Ensemble read_csv_dir(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), dir.string() + " is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  require(!files.empty(), dir.string() + " contains no .csv files");
  std::vector<Path> paths;
  for (const auto& f : files) {
    std::ifstream in(f);
    require(in.good(), "cannot open " + f.string());
    paths.push_back(parse_path_csv(in, f.filename().string()));
  }
  return detail::homogenize(std::move(paths));
}

/// Reads a JSON-lines file, or a directory of CSV files.
inline Ensemble read_dataset(const std::filesystem::path& source) {
  if (std::filesystem::is_directory(source)) return read_csv_dir(source);
  std::ifstream in(source);
  require(in.good(), "cannot open dataset " + source.string());
  return parse_jsonl(in);
}

inline void write_csv_dir(const std::filesystem::path& dir, const Ensemble& e) {
  std::filesystem::create_directories(dir);
  const std::size_t width = std::to_string(e.size()).size();
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::string idx = std::to_string(i);
    idx.insert(0, width - idx.size(), '0');
    std::ofstream out(dir / ("path_" + idx + ".csv"));
    write_path_csv(out, e[i]);
  }
}

}  // namespace hokme
